//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every export builds the same random geometric graph from
//! `(n, radius, graph_seed)` and returns a JSON string for the page to draw.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use gpqubo::anneal::{self, AnnealConfig};
use gpqubo::evaluate::{self, Formulation};
use gpqubo::graph::generators::random_geometric;
use gpqubo::qubo::build_bipartition_qubo;
use gpqubo::sparsify::{forest_fire_scores, sparsify};
use gpqubo::{rng, Graph, Penalty};

/// Vertices are capped so a slow browser tab stays responsive.
const MAX_VERTICES: usize = 600;

#[derive(Serialize)]
pub struct Layout {
    pub positions: Vec<(f64, f64)>,
    pub edges: Vec<(usize, usize)>,
}

#[derive(Serialize)]
pub struct PartitionView {
    #[serde(flatten)]
    pub layout: Layout,
    pub labels: Vec<usize>,
    pub cut: usize,
    pub cut_raw: usize,
    pub part_sizes: Vec<usize>,
    pub penalty: f64,
    pub wall_time: f64,
}

#[derive(Serialize)]
pub struct TraceView {
    pub sweeps: Vec<u64>,
    pub temperature: Vec<f64>,
    pub energy: Vec<f64>,
    pub best_energy: Vec<f64>,
    pub final_cut: usize,
}

#[derive(Serialize)]
pub struct SparsifyView {
    #[serde(flatten)]
    pub layout: Layout,
    pub scores: Vec<f64>,
    pub kept: Vec<bool>,
    pub kept_count: usize,
}

fn build_graph(n: usize, radius: f64, graph_seed: u64) -> Result<(Graph, Layout), String> {
    if n == 0 || n > MAX_VERTICES {
        return Err(format!("n must be in 1..={MAX_VERTICES}"));
    }
    let mut r = rng::stream(graph_seed, 0);
    let (g, positions) = random_geometric(n, radius, &mut r);
    let edges = g.edges();
    Ok((g, Layout { positions, edges }))
}

fn anneal_config(sweeps: u64, seed: u64) -> AnnealConfig {
    AnnealConfig {
        sweeps,
        replicas: 1,
        seed,
        ..AnnealConfig::default()
    }
}

pub fn partition_view(
    n: usize,
    radius: f64,
    graph_seed: u64,
    k: usize,
    epsilon: f64,
    sweeps: u64,
    seed: u64,
) -> Result<PartitionView, String> {
    let (g, layout) = build_graph(n, radius, graph_seed)?;
    let run = evaluate::solve_partition(&g, k, epsilon, Penalty::Auto, Formulation::Auto, &anneal_config(sweeps, seed))
        .map_err(|e| e.to_string())?;
    Ok(PartitionView {
        layout,
        labels: run.partition.labels().to_vec(),
        cut: run.cut_repaired,
        cut_raw: run.cut_raw,
        part_sizes: run.partition.part_sizes(),
        penalty: run.penalty,
        wall_time: run.solve.wall_time,
    })
}

pub fn trace_view(n: usize, radius: f64, graph_seed: u64, sweeps: u64, seed: u64) -> Result<TraceView, String> {
    let (g, _) = build_graph(n, radius, graph_seed)?;
    let model = build_bipartition_qubo(&g, 0.0, Penalty::Auto).map_err(|e| e.to_string())?;
    let cfg = AnnealConfig {
        trace_every: Some((sweeps / 200).max(1)),
        ..anneal_config(sweeps, seed)
    };
    let res = anneal::solve(&model, &cfg).map_err(|e| e.to_string())?;
    let (raw, _) = evaluate::decode(&model, &res.best_bits).map_err(|e| e.to_string())?;
    let repaired = evaluate::repair(&g, &raw, 2, 0.0).map_err(|e| e.to_string())?;
    let trace = res.energy_trace.unwrap_or_default();
    Ok(TraceView {
        sweeps: trace.iter().map(|t| t.sweep).collect(),
        temperature: trace.iter().map(|t| t.temperature).collect(),
        energy: trace.iter().map(|t| t.energy).collect(),
        best_energy: trace.iter().map(|t| t.best_energy).collect(),
        final_cut: gpqubo::cut_edges(&g, &repaired).map_err(|e| e.to_string())?,
    })
}

pub fn sparsify_view(
    n: usize,
    radius: f64,
    graph_seed: u64,
    pf: f64,
    walks: usize,
    keep_ratio: f64,
    seed: u64,
) -> Result<SparsifyView, String> {
    let (g, layout) = build_graph(n, radius, graph_seed)?;
    let scores = forest_fire_scores(&g, pf, walks, seed).map_err(|e| e.to_string())?;
    let sparse = sparsify(&g, &scores, keep_ratio).map_err(|e| e.to_string())?;
    let kept: Vec<bool> = layout.edges.iter().map(|&(u, v)| sparse.has_edge(u, v)).collect();
    Ok(SparsifyView {
        kept_count: sparse.m(),
        layout,
        scores: scores.scores,
        kept,
    })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

/// Partition a random geometric graph; JSON with positions, edges and labels.
#[wasm_bindgen]
pub fn partition_graph(
    n: usize,
    radius: f64,
    graph_seed: u32,
    k: usize,
    epsilon: f64,
    sweeps: u32,
    seed: u32,
) -> Result<String, JsError> {
    to_js(partition_view(n, radius, graph_seed.into(), k, epsilon, sweeps.into(), seed.into()))
}

/// Energy trace of a single-replica bipartition anneal.
#[wasm_bindgen]
pub fn anneal_trace(n: usize, radius: f64, graph_seed: u32, sweeps: u32, seed: u32) -> Result<String, JsError> {
    to_js(trace_view(n, radius, graph_seed.into(), sweeps.into(), seed.into()))
}

/// Forest-fire scores and the edges kept at `keep_ratio`.
#[wasm_bindgen]
pub fn sparsify_graph(
    n: usize,
    radius: f64,
    graph_seed: u32,
    pf: f64,
    walks: usize,
    keep_ratio: f64,
    seed: u32,
) -> Result<String, JsError> {
    to_js(sparsify_view(n, radius, graph_seed.into(), pf, walks, keep_ratio, seed.into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_view_is_consistent() {
        let v = partition_view(60, 0.2, 1, 2, 0.0, 500, 3).unwrap();
        assert_eq!(v.labels.len(), 60);
        assert_eq!(v.part_sizes, vec![30, 30]);
        let cut = v.layout.edges.iter().filter(|&&(a, b)| v.labels[a] != v.labels[b]).count();
        assert_eq!(cut, v.cut);
        let v3 = partition_view(30, 0.3, 1, 3, 0.0, 500, 3).unwrap();
        assert_eq!(v3.part_sizes, vec![10, 10, 10]);
    }

    #[test]
    fn trace_is_recorded() {
        let t = trace_view(40, 0.25, 2, 1000, 0).unwrap();
        assert!(t.sweeps.len() >= 100);
        assert_eq!(t.energy.len(), t.sweeps.len());
        assert!(t.best_energy.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn sparsify_view_keeps_ratio() {
        let s = sparsify_view(50, 0.25, 4, 0.7, 10, 0.7, 0).unwrap();
        assert_eq!(s.kept.len(), s.layout.edges.len());
        assert_eq!(s.kept.iter().filter(|&&k| k).count(), s.kept_count);
        assert_eq!(s.kept_count, (0.7 * s.layout.edges.len() as f64).round() as usize);
    }

    #[test]
    fn bad_sizes_are_rejected() {
        assert!(build_graph(0, 0.1, 0).is_err());
        assert!(build_graph(MAX_VERTICES + 1, 0.1, 0).is_err());
        assert!(sparsify_view(20, 0.3, 0, 1.5, 1, 0.7, 0).is_err());
    }
}
