//! Forest-fire edge scoring, score-based sparsification, and the
//! sparsify -> solve -> project pipeline.

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::anneal::AnnealConfig;
use crate::error::{Error, Result};
use crate::evaluate::{solve_partition, Formulation};
use crate::graph::{cut_edges, Graph, Partition};
use crate::qubo::Penalty;
use crate::rng;

/// Traversal counts per edge id, accumulated over `walks` burns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeScores {
    pub scores: Vec<f64>,
    pub seed: u64,
    pub burn_probability: f64,
    pub walks: usize,
}

/// Runs `walks` forest-fire burns over the whole graph. Each burn repeatedly
/// ignites a uniformly random unburned vertex and spreads: a burning vertex
/// ignites `min(X, #unburned neighbors)` random unburned neighbors with
/// `X ~ Geometric(1 - pf)` (mean `pf / (1 - pf)`), and every edge the fire
/// travels along scores one point.
pub fn forest_fire_scores(g: &Graph, pf: f64, walks: usize, seed: u64) -> Result<EdgeScores> {
    if !(pf > 0.0 && pf < 1.0) {
        return Err(Error::InvalidArgument(format!("burn probability must be in (0, 1), got {pf}")));
    }
    if walks == 0 {
        return Err(Error::InvalidArgument("walks must be >= 1".into()));
    }
    let spread = Geometric::new(1.0 - pf).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut rng = rng::stream(seed, 0);
    let n = g.n();
    let mut scores = vec![0.0; g.m()];
    let mut burned = vec![false; n];
    let mut order: Vec<usize> = (0..n).collect();
    let mut frontier = std::collections::VecDeque::new();
    let mut fresh: Vec<(usize, usize)> = Vec::new();
    for _ in 0..walks {
        burned.fill(false);
        // The first unburned vertex of a random order is a uniform pick
        // among the unburned ones.
        order.shuffle(&mut rng);
        for &start in &order {
            if burned[start] {
                continue;
            }
            burned[start] = true;
            frontier.push_back(start);
            while let Some(v) = frontier.pop_front() {
                fresh.clear();
                fresh.extend(g.incident(v).filter(|&(u, _)| !burned[u]));
                if fresh.is_empty() {
                    continue;
                }
                let want = spread.sample(&mut rng).min(fresh.len() as u64) as usize;
                let (chosen, _) = fresh.partial_shuffle(&mut rng, want);
                for &(u, e) in chosen.iter() {
                    burned[u] = true;
                    scores[e] += 1.0;
                    frontier.push_back(u);
                }
            }
        }
    }
    Ok(EdgeScores {
        scores,
        seed,
        burn_probability: pf,
        walks,
    })
}

/// Number of edges kept: `round(keep_ratio * m)`, halves rounded up.
/// The tolerance keeps products like `0.7 * 5` from landing just below the
/// half in binary floating point.
pub fn kept_edge_count(m: usize, keep_ratio: f64) -> usize {
    ((keep_ratio * m as f64 + 1e-9).round() as usize).min(m)
}

/// Keeps the [`kept_edge_count`] highest-scoring edges on the same vertex
/// set; equal scores keep the lower edge id (lexicographic endpoints).
pub fn sparsify(g: &Graph, scores: &EdgeScores, keep_ratio: f64) -> Result<Graph> {
    if !(keep_ratio > 0.0 && keep_ratio <= 1.0) {
        return Err(Error::InvalidArgument(format!("keep ratio must be in (0, 1], got {keep_ratio}")));
    }
    if scores.scores.len() != g.m() {
        return Err(Error::LengthMismatch {
            expected: g.m(),
            found: scores.scores.len(),
        });
    }
    let mut ids: Vec<usize> = (0..g.m()).collect();
    ids.sort_by(|&a, &b| scores.scores[b].total_cmp(&scores.scores[a]).then(a.cmp(&b)));
    ids.truncate(kept_edge_count(g.m(), keep_ratio));
    Ok(g.edge_subgraph(&ids))
}

/// Cut of `p` on the original graph. Both graphs share the vertex set, so
/// the labels carry over unchanged.
pub fn project_partition(original: &Graph, p: &Partition) -> Result<usize> {
    cut_edges(original, p)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub keep_ratio: f64,
    pub burn_probability: f64,
    pub walks: usize,
    pub repeats: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            keep_ratio: 0.7,
            burn_probability: 0.7,
            walks: 10,
            repeats: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Repetition {
    pub sparse_edges: usize,
    pub sparse_cut: usize,
    pub projected_cut: usize,
}

#[derive(Clone, Debug)]
pub struct PipelineResult {
    /// Best projected partition over all repetitions.
    pub partition: Partition,
    pub projected_cut: usize,
    pub best_repetition: usize,
    pub repetitions: Vec<Repetition>,
    pub penalty: f64,
    pub wall_time: f64,
}

/// Repeats sparsify, solve on the sparse graph, and project back; keeps the
/// lowest projected cut (earliest repetition on ties). Repetition `r` draws
/// its forest-fire and annealer seeds from `(seed, r)`.
pub fn sparsify_pipeline(
    g: &Graph,
    k: usize,
    epsilon: f64,
    penalty: Penalty,
    anneal: &AnnealConfig,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<PipelineResult> {
    if cfg.repeats == 0 {
        return Err(Error::InvalidArgument("repeats must be >= 1".into()));
    }
    let start = web_time::Instant::now();
    let run = |r: usize| -> Result<(Repetition, Partition, f64)> {
        let scores = forest_fire_scores(g, cfg.burn_probability, cfg.walks, rng::derive_seed(seed, 2 * r as u64))?;
        let sparse = sparsify(g, &scores, cfg.keep_ratio)?;
        let solver = AnnealConfig {
            seed: rng::derive_seed(seed, 2 * r as u64 + 1),
            ..anneal.clone()
        };
        let out = solve_partition(&sparse, k, epsilon, penalty, Formulation::Auto, &solver)?;
        let projected_cut = project_partition(g, &out.partition)?;
        Ok((
            Repetition {
                sparse_edges: sparse.m(),
                sparse_cut: out.cut_repaired,
                projected_cut,
            },
            out.partition,
            out.penalty,
        ))
    };

    #[cfg(feature = "parallel")]
    let results: Vec<Result<(Repetition, Partition, f64)>> = {
        use rayon::prelude::*;
        (0..cfg.repeats).into_par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<Result<(Repetition, Partition, f64)>> = (0..cfg.repeats).map(run).collect();

    let results = results.into_iter().collect::<Result<Vec<_>>>()?;
    let best_repetition = (0..results.len())
        .min_by_key(|&r| (results[r].0.projected_cut, r))
        .unwrap();
    let (partition, penalty) = (results[best_repetition].1.clone(), results[best_repetition].2);
    Ok(PipelineResult {
        projected_cut: results[best_repetition].0.projected_cut,
        partition,
        best_repetition,
        repetitions: results.into_iter().map(|(rep, _, _)| rep).collect(),
        penalty,
        wall_time: start.elapsed().as_secs_f64(),
    })
}
