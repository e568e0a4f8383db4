//! Digital-annealer style simulated annealing for [`QuboModel`]s.
//!
//! Each step ("sweep") evaluates the Metropolis test for every single-bit
//! flip in parallel against the current state, then flips one accepted bit
//! chosen uniformly. When nothing is accepted, a dynamic offset is added to
//! every candidate's acceptance test so the chain eventually moves out of
//! local minima.

use rand::Rng;
use serde::{Deserialize, Serialize};
use web_time::Instant;

use crate::error::{Error, Result};
use crate::qubo::{Assignment, QuboModel};
use crate::rng;

/// Sweeps between time-limit checks.
pub const TIME_CHECK_INTERVAL: u64 = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Schedule {
    #[default]
    Geometric,
    Linear,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Init {
    /// Independent uniform bits.
    #[default]
    Random,
    /// Balanced random partition with exact slack (partition models only).
    Balanced,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnealConfig {
    pub sweeps: u64,
    /// `None` picks the largest `|delta|` of the initial state.
    pub temp_initial: Option<f64>,
    pub temp_final: f64,
    pub schedule: Schedule,
    pub replicas: usize,
    pub seed: u64,
    /// Seconds.
    pub time_limit: Option<f64>,
    /// `None` means `temp_final / 10`.
    pub offset_increment: Option<f64>,
    pub init: Init,
    /// Record a trace point every this many sweeps.
    pub trace_every: Option<u64>,
}

impl Default for AnnealConfig {
    fn default() -> Self {
        AnnealConfig {
            sweeps: 10_000,
            temp_initial: None,
            temp_final: 0.1,
            schedule: Schedule::Geometric,
            replicas: 8,
            seed: 0,
            time_limit: None,
            offset_increment: None,
            init: Init::Random,
            trace_every: None,
        }
    }
}

impl AnnealConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.sweeps == 0 {
            return bad("sweeps must be >= 1".into());
        }
        if self.replicas == 0 {
            return bad("replicas must be >= 1".into());
        }
        if !(self.temp_final > 0.0) || !self.temp_final.is_finite() {
            return bad(format!("temp_final must be positive, got {}", self.temp_final));
        }
        if let Some(t0) = self.temp_initial {
            if !(t0 >= self.temp_final) || !t0.is_finite() {
                return bad(format!("temp_initial {t0} must be >= temp_final {}", self.temp_final));
            }
        }
        if let Some(inc) = self.offset_increment {
            if !(inc >= 0.0) || !inc.is_finite() {
                return bad(format!("offset_increment must be >= 0, got {inc}"));
            }
        }
        if let Some(t) = self.time_limit {
            if !(t > 0.0) {
                return bad(format!("time_limit must be positive, got {t}"));
            }
        }
        if self.trace_every == Some(0) {
            return bad("trace_every must be >= 1".into());
        }
        Ok(())
    }

    pub fn offset_increment(&self) -> f64 {
        self.offset_increment.unwrap_or(self.temp_final / 10.0)
    }

    /// Temperature at sweep `s` (0-based) given the resolved initial temperature.
    pub fn temperature(&self, t0: f64, s: u64) -> f64 {
        let frac = s as f64 / self.sweeps as f64;
        match self.schedule {
            Schedule::Geometric => t0 * (self.temp_final / t0).powf(frac),
            Schedule::Linear => t0 + (self.temp_final - t0) * frac,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub sweep: u64,
    pub temperature: f64,
    pub energy: f64,
    pub best_energy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveResult {
    pub best_bits: Assignment,
    pub best_energy: f64,
    /// Sweeps performed by the winning replica.
    pub sweeps_done: u64,
    /// Sweeps over all replicas.
    pub total_sweeps: u64,
    /// Seconds.
    pub wall_time: f64,
    pub replica_id: usize,
    pub seed: u64,
    pub energy_trace: Option<Vec<TracePoint>>,
}

#[derive(Serialize, Deserialize)]
struct SolveResultJson {
    bits: String,
    energy: f64,
    sweeps: u64,
    total_sweeps: u64,
    wall_time: f64,
    seed: u64,
    replica_id: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    trace: Option<Vec<TracePoint>>,
}

impl SolveResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&SolveResultJson {
            bits: self.best_bits.to_bit_string(),
            energy: self.best_energy,
            sweeps: self.sweeps_done,
            total_sweeps: self.total_sweeps,
            wall_time: self.wall_time,
            seed: self.seed,
            replica_id: self.replica_id,
            trace: self.energy_trace.clone(),
        })
        .expect("solve result serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let j: SolveResultJson = serde_json::from_str(text)?;
        Ok(SolveResult {
            best_bits: Assignment::from_bit_string(&j.bits)?,
            best_energy: j.energy,
            sweeps_done: j.sweeps,
            total_sweeps: j.total_sweeps,
            wall_time: j.wall_time,
            replica_id: j.replica_id,
            seed: j.seed,
            energy_trace: j.trace,
        })
    }
}

/// Cached quantities that make single-flip deltas `O(1)`.
///
/// `sparse[i]` is the expanded linear coefficient of `i` plus the explicit
/// quadratic terms against the current bits; the penalty groups contribute
/// through their running weighted sums.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalField {
    sparse: Vec<f64>,
    group_sums: Vec<f64>,
}

impl LocalField {
    pub fn new(model: &QuboModel, a: &Assignment) -> Result<Self> {
        if a.len() != model.num_vars() {
            return Err(Error::LengthMismatch {
                expected: model.num_vars(),
                found: a.len(),
            });
        }
        let mut sparse = model.linear();
        for (i, s) in sparse.iter_mut().enumerate() {
            *s += model
                .row(i)
                .iter()
                .filter(|&&(j, _)| a.get(j) == 1)
                .map(|&(_, c)| c)
                .sum::<f64>();
        }
        Ok(LocalField {
            sparse,
            group_sums: model.group_sums(a),
        })
    }

    /// `h_i` such that flipping `i` changes the energy by `(1 - 2 a_i) h_i`.
    #[inline]
    fn field(&self, model: &QuboModel, a: &Assignment, i: usize) -> f64 {
        let own = f64::from(a.get(i));
        let groups = model.groups();
        self.sparse[i]
            + model
                .memberships(i)
                .iter()
                .map(|&(g, w)| 2.0 * groups[g].scale * w * (self.group_sums[g] - w * own))
                .sum::<f64>()
    }

    #[inline]
    fn delta(&self, model: &QuboModel, a: &Assignment, i: usize) -> f64 {
        let h = self.field(model, a, i);
        if a.get(i) == 0 {
            h
        } else {
            -h
        }
    }

    /// Flips bit `i` of `a` and updates the cache in `O(row + groups)`.
    fn flip(&mut self, model: &QuboModel, a: &mut Assignment, i: usize) {
        let sign = if a.get(i) == 0 { 1.0 } else { -1.0 };
        for &(j, c) in model.row(i) {
            self.sparse[j] += sign * c;
        }
        for &(g, w) in model.memberships(i) {
            self.group_sums[g] += sign * w;
        }
        a.flip(i);
    }
}

/// `energy(a with bit i flipped) - energy(a)` from the cached local field.
pub fn delta_energy(model: &QuboModel, a: &Assignment, i: usize, field: &LocalField) -> Result<f64> {
    if i >= model.num_vars() {
        return Err(Error::InvalidArgument(format!(
            "variable {i} out of range for {} variables",
            model.num_vars()
        )));
    }
    Ok(field.delta(model, a, i))
}

/// State of one annealing chain.
#[derive(Clone, Debug)]
pub struct Chain<'m> {
    model: &'m QuboModel,
    bits: Assignment,
    field: LocalField,
    energy: f64,
    offset: f64,
    candidates: Vec<usize>,
}

impl<'m> Chain<'m> {
    pub fn new(model: &'m QuboModel, bits: Assignment) -> Result<Self> {
        let field = LocalField::new(model, &bits)?;
        let energy = model.energy(&bits)?;
        Ok(Chain {
            model,
            bits,
            field,
            energy,
            offset: 0.0,
            candidates: Vec::new(),
        })
    }

    pub fn bits(&self) -> &Assignment {
        &self.bits
    }

    /// Energy tracked incrementally.
    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn field(&self) -> &LocalField {
        &self.field
    }

    pub fn delta(&self, i: usize) -> f64 {
        self.field.delta(self.model, &self.bits, i)
    }

    pub fn max_abs_delta(&self) -> f64 {
        (0..self.model.num_vars())
            .map(|i| self.delta(i).abs())
            .fold(0.0, f64::max)
    }

    /// Flips bit `i` unconditionally and returns the energy change.
    pub fn flip(&mut self, i: usize) -> f64 {
        let d = self.delta(i);
        self.field.flip(self.model, &mut self.bits, i);
        self.energy += d;
        d
    }

    /// One parallel-trial step at `temperature`. Returns the flipped variable
    /// and its energy change, or `None` when every candidate was rejected (in
    /// which case the offset grows by `offset_increment`).
    pub fn sweep<R: Rng + ?Sized>(
        &mut self,
        temperature: f64,
        offset_increment: f64,
        rng: &mut R,
    ) -> Option<(usize, f64)> {
        self.candidates.clear();
        for i in 0..self.model.num_vars() {
            let d = self.delta(i) - self.offset;
            if d <= 0.0 || rng.random::<f64>() < (-d / temperature).exp() {
                self.candidates.push(i);
            }
        }
        if self.candidates.is_empty() {
            self.offset += offset_increment;
            return None;
        }
        let i = self.candidates[rng.random_range(0..self.candidates.len())];
        let d = self.flip(i);
        self.offset = 0.0;
        Some((i, d))
    }
}

/// Free-function form of [`Chain::sweep`].
pub fn sweep<R: Rng + ?Sized>(
    chain: &mut Chain<'_>,
    temperature: f64,
    offset_increment: f64,
    rng: &mut R,
) -> Option<(usize, f64)> {
    chain.sweep(temperature, offset_increment, rng)
}

struct ReplicaOutcome {
    best_bits: Assignment,
    best_energy: f64,
    sweeps_done: u64,
    trace: Option<Vec<TracePoint>>,
}

fn initial_bits<R: Rng + ?Sized>(model: &QuboModel, init: Init, rng: &mut R) -> Result<Assignment> {
    match init {
        Init::Balanced if model.meta().is_some() => model.balanced_assignment(rng),
        Init::Balanced => Err(Error::InvalidArgument(
            "balanced initialization needs a partition model".into(),
        )),
        Init::Random => Assignment::from_bits(
            (0..model.num_vars()).map(|_| rng.random_range(0..2u8)).collect(),
        ),
    }
}

fn run_replica(model: &QuboModel, cfg: &AnnealConfig, replica: usize, start: Instant) -> Result<ReplicaOutcome> {
    let mut rng = rng::stream(cfg.seed, replica as u64);
    let bits = initial_bits(model, cfg.init, &mut rng)?;
    let mut chain = Chain::new(model, bits)?;
    let t0 = match cfg.temp_initial {
        Some(t) => t,
        None => chain.max_abs_delta().max(cfg.temp_final),
    };
    let increment = cfg.offset_increment();
    let mut best_bits = chain.bits().clone();
    let mut best_energy = chain.energy();
    let mut trace = cfg.trace_every.map(|_| Vec::new());
    let mut sweeps_done = 0;
    for s in 0..cfg.sweeps {
        if let Some(limit) = cfg.time_limit {
            if s % TIME_CHECK_INTERVAL == 0 && s > 0 && start.elapsed().as_secs_f64() >= limit {
                break;
            }
        }
        let temperature = cfg.temperature(t0, s);
        chain.sweep(temperature, increment, &mut rng);
        sweeps_done = s + 1;
        if chain.energy() < best_energy {
            best_energy = chain.energy();
            best_bits.clone_from(chain.bits());
        }
        if let (Some(trace), Some(every)) = (trace.as_mut(), cfg.trace_every) {
            if s % every == 0 || s + 1 == cfg.sweeps {
                trace.push(TracePoint {
                    sweep: s,
                    temperature,
                    energy: chain.energy(),
                    best_energy,
                });
            }
        }
    }
    // Incremental sums can drift for non-integer coefficients; report the
    // exact energy of the returned bits.
    let best_energy = model.energy(&best_bits)?;
    Ok(ReplicaOutcome {
        best_bits,
        best_energy,
        sweeps_done,
        trace,
    })
}

/// Runs `cfg.replicas` independent chains and returns the best state seen.
/// Ties go to the lowest replica index.
pub fn solve(model: &QuboModel, cfg: &AnnealConfig) -> Result<SolveResult> {
    cfg.validate()?;
    let start = Instant::now();
    if model.num_vars() == 0 {
        return Ok(SolveResult {
            best_bits: Assignment::zeros(0),
            best_energy: model.constant(),
            sweeps_done: 0,
            total_sweeps: 0,
            wall_time: start.elapsed().as_secs_f64(),
            replica_id: 0,
            seed: cfg.seed,
            energy_trace: None,
        });
    }

    #[cfg(feature = "parallel")]
    let outcomes: Vec<Result<ReplicaOutcome>> = {
        use rayon::prelude::*;
        (0..cfg.replicas)
            .into_par_iter()
            .map(|r| run_replica(model, cfg, r, start))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let outcomes: Vec<Result<ReplicaOutcome>> = (0..cfg.replicas)
        .map(|r| run_replica(model, cfg, r, start))
        .collect();

    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
    let total_sweeps = outcomes.iter().map(|o| o.sweeps_done).sum();
    let (replica_id, best) = outcomes
        .into_iter()
        .enumerate()
        .reduce(|acc, cur| if cur.1.best_energy < acc.1.best_energy { cur } else { acc })
        .expect("at least one replica");
    Ok(SolveResult {
        best_bits: best.best_bits,
        best_energy: best.best_energy,
        sweeps_done: best.sweeps_done,
        total_sweeps,
        wall_time: start.elapsed().as_secs_f64(),
        replica_id,
        seed: cfg.seed,
        energy_trace: best.trace,
    })
}
