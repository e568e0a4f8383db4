use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn gpqubo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gpqubo"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

// Path on 6 vertices, 1-based METIS adjacency.
const P6: &str = "6 5\n2\n1 3\n2 4\n3 5\n4 6\n5\n";
// Cycle on 9 vertices.
const C9: &str = "9 9\n2 9\n1 3\n2 4\n3 5\n4 6\n5 7\n6 8\n7 9\n8 1\n";

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn partition_path() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(dir.path(), "p6.graph", P6);
    let part = dir.path().join("p6.part");
    let out = gpqubo(&["partition", "--graph", s(&g), "--sweeps", "500", "--replicas", "2", "--output", s(&part)]);
    let v = json(&out);
    assert_eq!(v["graph"], "p6");
    assert_eq!(v["cut_repaired"], 1);
    assert_eq!(v["part_sizes"], serde_json::json!([3, 3]));
    assert_eq!(v["solve"]["bits"].as_str().unwrap().len(), 6);

    let text = std::fs::read_to_string(&part).unwrap();
    assert!(text.starts_with("% graph=p6 k=2"));
    let eval = json(&gpqubo(&["evaluate", "--graph", s(&g), "--partition", s(&part)]));
    assert_eq!(eval["cut"], 1);
    assert_eq!(eval["balance_ok"], true);
    assert_eq!(eval["approximation_ratio"], Value::Null);
    let eval = json(&gpqubo(&["evaluate", "--graph", s(&g), "--partition", s(&part), "--best-known", "1"]));
    assert_eq!(eval["approximation_ratio"], 1.0);
}

#[test]
fn partition_is_reproducible_and_plain_format() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(dir.path(), "c9.graph", C9);
    let args = ["partition", "--graph", s(&g), "--sweeps", "400", "--seed", "5", "--format", "partition"];
    let a = gpqubo(&args);
    let b = gpqubo(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(String::from_utf8_lossy(&a.stdout).lines().filter(|l| !l.starts_with('%')).count(), 9);
}

#[test]
fn kway_cycle() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(dir.path(), "c9.graph", C9);
    let v = json(&gpqubo(&["kway", "--graph", s(&g), "--k", "3", "--sweeps", "2000", "--replicas", "4"]));
    assert_eq!(v["k"], 3);
    assert_eq!(v["cut_repaired"], 3);
    assert_eq!(v["part_sizes"], serde_json::json!([3, 3, 3]));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.graph", "3 2\n2\n1 x\n\n");
    assert_eq!(gpqubo(&["partition", "--graph", s(&bad)]).status.code(), Some(2));
    let short = write(dir.path(), "short.graph", "3 5\n2\n1\n\n");
    assert_eq!(gpqubo(&["partition", "--graph", s(&short)]).status.code(), Some(2));

    let g = write(dir.path(), "p6.graph", P6);
    assert_eq!(gpqubo(&["kway", "--graph", s(&g), "--k", "7"]).status.code(), Some(3));
    assert_eq!(gpqubo(&["partition", "--graph", s(&g), "--k", "3"]).status.code(), Some(1));
    assert_eq!(gpqubo(&["partition", "--graph", s(&g), "--penalty", "-1"]).status.code(), Some(2));
    assert_eq!(gpqubo(&["partition", "--graph", "/nonexistent.graph"]).status.code(), Some(1));
}

#[test]
fn sparsify_pipeline_command() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(dir.path(), "c9.graph", C9);
    let args = [
        "sparsify-pipeline", "--graph", s(&g), "--repeats", "3", "--sweeps", "300", "--replicas", "2", "--seed", "4",
    ];
    let a = json(&gpqubo(&args));
    let b = json(&gpqubo(&args));
    assert_eq!(a["repetitions"], b["repetitions"]);
    let reps = a["repetitions"].as_array().unwrap();
    assert_eq!(reps.len(), 3);
    for r in reps {
        assert_eq!(r["sparse_edges"], 6);
        assert!(r["projected_cut"].as_u64() >= r["sparse_cut"].as_u64());
    }
}

#[test]
fn convert_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(dir.path(), "p6.graph", P6);
    let mtx = dir.path().join("p6.mtx");
    let back = dir.path().join("back.graph");
    assert!(gpqubo(&["convert", "--input", s(&g), "--output", s(&mtx)]).status.success());
    assert!(std::fs::read_to_string(&mtx).unwrap().starts_with("%%MatrixMarket matrix coordinate pattern symmetric"));
    assert!(gpqubo(&["convert", "--input", s(&mtx), "--output", s(&back)]).status.success());
    assert_eq!(std::fs::read_to_string(&back).unwrap(), P6);

    let q = dir.path().join("p6.qubo");
    assert!(gpqubo(&["convert", "--input", s(&g), "--output", s(&q), "--epsilon", "0"]).status.success());
    let qtext = std::fs::read_to_string(&q).unwrap();
    assert!(qtext.contains("c meta k=2"));
    let inter = dir.path().join("inter.metis");
    assert!(gpqubo(&["convert", "--input", s(&q), "--output", s(&inter)]).status.success());
    // The balance penalty couples every pair of indicators.
    assert!(std::fs::read_to_string(&inter).unwrap().starts_with("6 15"));

    let unknown = gpqubo(&["convert", "--input", s(&g), "--output", s(&dir.path().join("x.xyz"))]);
    assert_eq!(unknown.status.code(), Some(1));
}

#[test]
fn evaluate_qubo_solution() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(dir.path(), "p6.graph", P6);
    let q = dir.path().join("p6.qubo");
    assert!(gpqubo(&["convert", "--input", s(&g), "--output", s(&q)]).status.success());
    let sol = write(
        dir.path(),
        "sol.json",
        r#"{"bits":"000111","energy":1.0,"sweeps":0,"total_sweeps":0,"wall_time":0.0,"replica_id":0,"seed":0}"#,
    );
    let v = json(&gpqubo(&["evaluate", "--qubo", s(&q), "--solution", s(&sol)]));
    assert_eq!(v["energy"], 1.0);
    assert_eq!(v["labels"], serde_json::json!([0, 0, 0, 1, 1, 1]));
    assert_eq!(v["balance_ok"], true);

    let summary = dir.path().join("run.json");
    let run = gpqubo(&["partition", "--graph", s(&g), "--sweeps", "300"]);
    std::fs::write(&summary, &run.stdout).unwrap();
    let v = json(&gpqubo(&["evaluate", "--qubo", s(&q), "--solution", s(&summary)]));
    assert_eq!(v["energy"], 1.0);
}

#[test]
fn bench_command() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "p6.graph", P6);
    write(dir.path(), "c9.graph", C9);
    let cfg = write(
        dir.path(),
        "bench.toml",
        "graphs = [\"p6.graph\", \"c9.graph\"]\nks = [2]\nepsilons = [0.0, 0.05]\n[anneal]\nsweeps = 300\nreplicas = 2\n",
    );
    let ext = write(dir.path(), "ext.csv", "graph_id,solver_id,k,epsilon,cut\np6,other,2,0,2\n");
    let out = gpqubo(&["bench", "--config", s(&cfg), "--external", s(&ext), "--no-time-limit"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(out.stdout).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4 + 1);
    assert!(csv.lines().nth(1).unwrap().starts_with("p6,6,0.8333333333333334,sa,2,0.0,"));

    let md = gpqubo(&["bench", "--config", s(&cfg), "--external", s(&ext), "--format", "markdown", "--k", "2", "--epsilon", "0"]);
    let md = String::from_utf8(md.stdout).unwrap();
    assert!(md.contains("| p6 | 6 | 0.83 | 1* | **1** | 2 |"), "{md}");

    let bad = gpqubo(&["bench", "--config", s(&cfg), "--format", "xml"]);
    assert_eq!(bad.status.code(), Some(1));
    let broken = write(dir.path(), "broken.toml", "ks = [2\n");
    assert_eq!(gpqubo(&["bench", "--config", s(&broken)]).status.code(), Some(2));
}
