use gpqubo_web::{partition_view, sparsify_view, trace_view};

#[test]
fn views_describe_the_same_graph() {
    let p = partition_view(80, 0.2, 9, 2, 0.05, 2000, 0).unwrap();
    let s = sparsify_view(80, 0.2, 9, 0.7, 10, 0.5, 0).unwrap();
    assert_eq!(p.layout.positions, s.layout.positions);
    assert_eq!(p.layout.edges, s.layout.edges);
    let t = trace_view(80, 0.2, 9, 2000, 0).unwrap();
    assert_eq!(t.energy.len(), t.temperature.len());
    assert!(t.temperature.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn views_serialize_flat() {
    let p = partition_view(20, 0.4, 1, 2, 0.0, 500, 0).unwrap();
    let v: serde_json::Value = serde_json::to_value(&p).unwrap();
    assert!(v.get("positions").is_some());
    assert!(v.get("layout").is_none());
}
