//! Decoding annealer output into partitions, balance repair, and quality metrics.

use serde::{Deserialize, Serialize};

use crate::anneal::{self, AnnealConfig, SolveResult};
use crate::error::{Error, Result};
use crate::graph::{balance_bounds, cut_edges, Graph, Partition};
use crate::qubo::{build_bipartition_qubo, build_kway_qubo, Assignment, Penalty, QuboModel};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feasibility {
    pub one_hot_ok: bool,
    pub balance_ok: bool,
    pub part_sizes: Vec<usize>,
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        self.one_hot_ok && self.balance_ok
    }
}

/// Reads the partition encoded by the indicator bits of `a`; slack bits are
/// ignored. A vertex with zero or several indicators set gets the lowest set
/// part (or part 0) and clears `one_hot_ok`.
pub fn decode(model: &QuboModel, a: &Assignment) -> Result<(Partition, Feasibility)> {
    let meta = *model
        .meta()
        .ok_or_else(|| Error::InvalidArgument("model has no partition variable map".into()))?;
    if a.len() != model.num_vars() {
        return Err(Error::LengthMismatch {
            expected: model.num_vars(),
            found: a.len(),
        });
    }
    let (n, k) = (meta.n, meta.k);
    let mut one_hot_ok = true;
    let labels: Vec<usize> = if meta.one_hot {
        (0..n)
            .map(|v| {
                let row = &a.bits()[v * k..(v + 1) * k];
                let set = row.iter().filter(|&&b| b == 1).count();
                if set != 1 {
                    one_hot_ok = false;
                }
                row.iter().position(|&b| b == 1).unwrap_or(0)
            })
            .collect()
    } else {
        a.bits()[..n].iter().map(|&b| b as usize).collect()
    };
    let p = Partition::new(labels, k)?;
    let part_sizes = p.part_sizes();
    let balance_ok = part_sizes
        .iter()
        .all(|&s| (meta.lower..=meta.upper).contains(&s));
    Ok((
        p,
        Feasibility {
            one_hot_ok,
            balance_ok,
            part_sizes,
        },
    ))
}

/// Greedy balance repair. While a part is above the upper bound (or below the
/// lower bound), moves the vertex whose relocation into the smallest part
/// raises the cut least, taking vertices from overfull parts first.
/// Ties go to the lowest vertex id.
pub fn repair(g: &Graph, p: &Partition, k: usize, epsilon: f64) -> Result<Partition> {
    let n = g.n();
    if p.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: p.len(),
        });
    }
    if p.k() != k {
        return Err(Error::InvalidArgument(format!(
            "partition has {} parts, expected {k}",
            p.k()
        )));
    }
    let (lower, upper) = balance_bounds(n, k, epsilon)?;
    if k > n || k * lower > n || k * upper < n {
        return Err(Error::Infeasible(format!(
            "no {k}-way partition of {n} vertices fits sizes {lower}..={upper}"
        )));
    }
    let mut p = p.clone();
    let mut sizes = p.part_sizes();
    let mut counts = vec![0usize; k];
    loop {
        let overfull = sizes.iter().any(|&s| s > upper);
        let underfull = sizes.iter().any(|&s| s < lower);
        if !overfull && !underfull {
            return Ok(p);
        }
        let target = (0..k).min_by_key(|&j| (sizes[j], j)).unwrap();
        let is_source = |j: usize| {
            j != target && if overfull { sizes[j] > upper } else { sizes[j] > lower }
        };
        let mut best: Option<(i64, usize)> = None;
        for v in 0..n {
            let own = p.labels()[v];
            if !is_source(own) {
                continue;
            }
            counts[own] = 0;
            counts[target] = 0;
            for &u in g.neighbors(v) {
                let l = p.labels()[u];
                if l == own || l == target {
                    counts[l] += 1;
                }
            }
            let increase = counts[own] as i64 - counts[target] as i64;
            if best.is_none_or(|(b, _)| increase < b) {
                best = Some((increase, v));
            }
        }
        let (_, v) = best.expect("a donor part exists while bounds are violated");
        sizes[p.labels()[v]] -= 1;
        sizes[target] += 1;
        p.set(v, target);
    }
}

/// `cut / best_known`. With `best_known = 0` the ratio is 1 for a zero cut
/// and undefined (`None`) otherwise.
pub fn approximation_ratio(cut: usize, best_known: usize) -> Option<f64> {
    match (cut, best_known) {
        (0, 0) => Some(1.0),
        (_, 0) => None,
        _ => Some(cut as f64 / best_known as f64),
    }
}

/// QUBO layout used for a partition run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Formulation {
    /// One indicator per vertex for `k = 2`, one-hot indicators otherwise.
    #[default]
    Auto,
    OneHot,
}

/// Doublings of an automatic penalty tried when the annealer's best state
/// violates a constraint.
pub const MAX_PENALTY_DOUBLINGS: usize = 2;

#[derive(Clone, Debug)]
pub struct PartitionRun {
    /// Decoded annealer output, possibly infeasible.
    pub raw: Partition,
    pub feasibility: Feasibility,
    /// Balanced partition after repair.
    pub partition: Partition,
    pub cut_raw: usize,
    pub cut_repaired: usize,
    pub penalty: f64,
    pub attempts: usize,
    pub solve: SolveResult,
}

pub fn build_model(g: &Graph, k: usize, epsilon: f64, penalty: Penalty, formulation: Formulation) -> Result<QuboModel> {
    match (k, formulation) {
        (2, Formulation::Auto) => build_bipartition_qubo(g, epsilon, penalty),
        _ => build_kway_qubo(g, k, epsilon, penalty),
    }
}

/// Builds the model, anneals, decodes and repairs. With [`Penalty::Auto`] an
/// infeasible best state triggers up to [`MAX_PENALTY_DOUBLINGS`] re-solves
/// with a doubled penalty before falling back to repair.
pub fn solve_partition(
    g: &Graph,
    k: usize,
    epsilon: f64,
    penalty: Penalty,
    formulation: Formulation,
    cfg: &AnnealConfig,
) -> Result<PartitionRun> {
    let mut current = penalty;
    let mut best: Option<PartitionRun> = None;
    let max_attempts = if penalty == Penalty::Auto { 1 + MAX_PENALTY_DOUBLINGS } else { 1 };
    let start = web_time::Instant::now();
    for attempt in 1..=max_attempts {
        // Retries share the time budget of a single run.
        let mut attempt_cfg = cfg.clone();
        if let Some(limit) = cfg.time_limit {
            let left = limit - start.elapsed().as_secs_f64();
            if attempt > 1 && left <= 0.0 {
                break;
            }
            attempt_cfg.time_limit = Some(left.max(f64::MIN_POSITIVE));
        }
        let model = build_model(g, k, epsilon, current, formulation)?;
        let solve = anneal::solve(&model, &attempt_cfg)?;
        let (raw, feasibility) = decode(&model, &solve.best_bits)?;
        let partition = repair(g, &raw, k, epsilon)?;
        let run = PartitionRun {
            cut_raw: cut_edges(g, &raw)?,
            cut_repaired: cut_edges(g, &partition)?,
            raw,
            feasibility,
            partition,
            penalty: model.penalty(),
            attempts: attempt,
            solve,
        };
        let feasible = run.feasibility.is_feasible();
        if best.as_ref().is_none_or(|b| run.cut_repaired < b.cut_repaired) {
            best = Some(run);
        } else if let Some(b) = best.as_mut() {
            b.attempts = attempt;
        }
        if feasible {
            break;
        }
        current = Penalty::Fixed(model.penalty() * 2.0);
    }
    Ok(best.expect("at least one attempt"))
}
