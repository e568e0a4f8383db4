//! QUBO models of balanced graph partitioning.
//!
//! A model is a quadratic polynomial over binary variables,
//!
//! ```text
//! E(a) = c + sum_i l_i a_i + sum_{i<j} q_ij a_i a_j + sum_g P_g (sum_i w_gi a_i - t_g)^2
//! ```
//!
//! The squared constraint residuals are kept in factored form
//! ([`PenaltyGroup`]) instead of being multiplied out: a balance constraint
//! over `n` vertices expands into `n^2 / 2` quadratic terms, while the
//! factored form costs `O(n)` memory and lets the annealer update a flip in
//! `O(1)` per group. [`QuboModel::quadratic`], [`QuboModel::linear`] and
//! [`QuboModel::constant`] give the fully expanded coefficients.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{balance_bounds, Graph, Partition};

/// What a binary variable stands for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarRole {
    /// `x_{vertex,part} = 1` iff the vertex sits in `part`. Bipartition
    /// models carry a single indicator per vertex, for part 1.
    Indicator { vertex: usize, part: usize },
    /// Slack bit of the balance constraint of `part`, contributing `weight`.
    Slack { part: usize, weight: u64 },
    /// Variable of a model read from a plain QUBO file.
    Free,
}

/// Partition instance a model was compiled from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionMeta {
    pub k: usize,
    pub epsilon: f64,
    pub n: usize,
    pub lower: usize,
    pub upper: usize,
    /// `k` indicators per vertex with one-hot constraints; otherwise a single
    /// part-1 indicator per vertex.
    pub one_hot: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub enum Penalty {
    /// [`default_penalty`] of the graph.
    #[default]
    Auto,
    Fixed(f64),
}

impl Penalty {
    pub fn resolve(self, g: &Graph) -> Result<f64> {
        match self {
            Penalty::Auto => Ok(default_penalty(g)),
            Penalty::Fixed(p) if p > 0.0 && p.is_finite() => Ok(p),
            Penalty::Fixed(p) => Err(Error::InvalidArgument(format!(
                "penalty must be a positive finite number, got {p}"
            ))),
        }
    }
}

impl std::str::FromStr for Penalty {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Penalty::Auto);
        }
        let p: f64 = s
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("penalty must be `auto` or a number, got `{s}`")))?;
        if p > 0.0 && p.is_finite() {
            Ok(Penalty::Fixed(p))
        } else {
            Err(Error::InvalidArgument(format!("penalty must be positive, got {p}")))
        }
    }
}

impl std::fmt::Display for Penalty {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Penalty::Auto => f.write_str("auto"),
            Penalty::Fixed(p) => write!(f, "{p}"),
        }
    }
}

/// `scale * (sum_i weights[i] * a[vars[i]] - target)^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct PenaltyGroup {
    pub vars: Vec<usize>,
    pub weights: Vec<f64>,
    pub target: f64,
    pub scale: f64,
}

/// 0/1 value per model variable.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Assignment(Vec<u8>);

impl Assignment {
    pub fn zeros(len: usize) -> Self {
        Assignment(vec![0; len])
    }

    pub fn from_bits(bits: Vec<u8>) -> Result<Self> {
        if let Some(b) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::InvalidArgument(format!("bit value {b} is not 0/1")));
        }
        Ok(Assignment(bits))
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> u8 {
        self.0[i]
    }

    pub fn set(&mut self, i: usize, v: u8) {
        self.0[i] = v;
    }

    pub fn flip(&mut self, i: usize) {
        self.0[i] ^= 1;
    }

    pub fn complement(&self) -> Self {
        Assignment(self.0.iter().map(|b| b ^ 1).collect())
    }

    /// Bits as a `0`/`1` string.
    pub fn to_bit_string(&self) -> String {
        self.0.iter().map(|&b| if b == 1 { '1' } else { '0' }).collect()
    }

    pub fn from_bit_string(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(Error::InvalidArgument(format!("invalid bit `{other}`"))),
            })
            .collect::<Result<Vec<u8>>>()
            .map(Assignment)
    }
}

#[derive(Clone, Debug)]
pub struct QuboModel {
    num_vars: usize,
    constant: f64,
    /// Linear coefficients excluding the penalty groups' contributions.
    base_linear: Vec<f64>,
    /// Symmetric off-diagonal terms, `rows[i]` sorted by column.
    rows: Vec<Vec<(usize, f64)>>,
    groups: Vec<PenaltyGroup>,
    /// `(group, weight)` memberships of each variable.
    memberships: Vec<Vec<(usize, f64)>>,
    var_map: Vec<VarRole>,
    penalty: f64,
    meta: Option<PartitionMeta>,
}

/// Capped binary expansion: weights `1, 2, 4, ..., 2^(b-2)` followed by
/// `range - (2^(b-1) - 1)`, with `b = ceil(log2(range + 1))`. Subset sums cover
/// exactly `0..=range`.
pub fn encode_slack_weights(range: u64) -> Vec<u64> {
    if range == 0 {
        return Vec::new();
    }
    let bits = 64 - range.leading_zeros();
    let mut weights: Vec<u64> = (0..bits - 1).map(|i| 1u64 << i).collect();
    weights.push(range - ((1u64 << (bits - 1)) - 1));
    weights
}

/// Bits selecting a subset of `encode_slack_weights(range)` that sums to `value`.
fn slack_bits(weights: &[u64], value: u64) -> Vec<u8> {
    let Some((&last, binary)) = weights.split_last() else {
        return Vec::new();
    };
    let binary_max = (1u64 << binary.len()) - 1;
    let (rest, top) = if value > binary_max {
        (value - last, 1)
    } else {
        (value, 0)
    };
    let mut bits: Vec<u8> = (0..binary.len()).map(|i| ((rest >> i) & 1) as u8).collect();
    bits.push(top);
    bits
}

/// `d_max + 1`: larger than the cut change of any single vertex move, so any
/// constraint violation costs more than moving vertices to repair it.
pub fn default_penalty(g: &Graph) -> f64 {
    (g.max_degree() + 1) as f64
}

struct ModelBuilder {
    constant: f64,
    linear: Vec<f64>,
    quadratic: BTreeMap<(usize, usize), f64>,
    groups: Vec<PenaltyGroup>,
    var_map: Vec<VarRole>,
}

impl ModelBuilder {
    fn new() -> Self {
        ModelBuilder {
            constant: 0.0,
            linear: Vec::new(),
            quadratic: BTreeMap::new(),
            groups: Vec::new(),
            var_map: Vec::new(),
        }
    }

    fn add_var(&mut self, role: VarRole) -> usize {
        self.var_map.push(role);
        self.linear.push(0.0);
        self.var_map.len() - 1
    }

    fn add_quadratic(&mut self, i: usize, j: usize, c: f64) {
        if i == j {
            self.linear[i] += c;
        } else {
            *self.quadratic.entry((i.min(j), i.max(j))).or_insert(0.0) += c;
        }
    }

    fn finish(self, penalty: f64, meta: Option<PartitionMeta>) -> QuboModel {
        let n = self.var_map.len();
        let mut rows = vec![Vec::new(); n];
        for (&(i, j), &c) in &self.quadratic {
            if c != 0.0 {
                rows[i].push((j, c));
                rows[j].push((i, c));
            }
        }
        for row in &mut rows {
            row.sort_unstable_by_key(|&(j, _)| j);
        }
        let mut memberships = vec![Vec::new(); n];
        for (g, group) in self.groups.iter().enumerate() {
            for (&v, &w) in group.vars.iter().zip(&group.weights) {
                memberships[v].push((g, w));
            }
        }
        QuboModel {
            num_vars: n,
            constant: self.constant,
            base_linear: self.linear,
            rows,
            groups: self.groups,
            memberships,
            var_map: self.var_map,
            penalty,
            meta,
        }
    }
}

/// Appends the slack chain of one balance constraint and returns the group.
fn balance_group(
    b: &mut ModelBuilder,
    part: usize,
    indicators: Vec<usize>,
    lower: usize,
    upper: usize,
    penalty: f64,
) -> PenaltyGroup {
    let mut vars = indicators;
    let mut weights = vec![1.0; vars.len()];
    for w in encode_slack_weights((upper - lower) as u64) {
        vars.push(b.add_var(VarRole::Slack { part, weight: w }));
        weights.push(w as f64);
    }
    PenaltyGroup {
        vars,
        weights,
        target: upper as f64,
        scale: penalty,
    }
}

/// Bipartition model: `x^T L x + P (x^T 1 + s - upper)^2` over one indicator
/// per vertex (`x_i = 1` puts vertex `i` in part 1) and slack bits `s`
/// covering `0..=upper - lower`.
///
/// With `epsilon = 0` and even `n` there is no slack and the constraint is
/// `x^T 1 = n / 2`.
pub fn build_bipartition_qubo(g: &Graph, epsilon: f64, penalty: Penalty) -> Result<QuboModel> {
    let n = g.n();
    if n < 2 {
        return Err(Error::InvalidArgument("bipartition needs at least 2 vertices".into()));
    }
    let (lower, upper) = balance_bounds(n, 2, epsilon)?;
    let p = penalty.resolve(g)?;
    let mut b = ModelBuilder::new();
    for v in 0..n {
        b.add_var(VarRole::Indicator { vertex: v, part: 1 });
    }
    for (u, v) in g.edges() {
        b.linear[u] += 1.0;
        b.linear[v] += 1.0;
        b.add_quadratic(u, v, -2.0);
    }
    let group = balance_group(&mut b, 1, (0..n).collect(), lower, upper, p);
    b.groups.push(group);
    let meta = PartitionMeta {
        k: 2,
        epsilon,
        n,
        lower,
        upper,
        one_hot: false,
    };
    Ok(b.finish(p, Some(meta)))
}

/// k-way model over indicators `x_{i,j}` (variable `i * k + j`):
/// `1/2 sum_j x_j^T L x_j`, plus `P (sum_j x_{i,j} - 1)^2` per vertex and
/// `P (x_j^T 1 + s_j - upper)^2` per part with slack `s_j` covering
/// `0..=upper - lower`.
pub fn build_kway_qubo(g: &Graph, k: usize, epsilon: f64, penalty: Penalty) -> Result<QuboModel> {
    let n = g.n();
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k must be >= 2, got {k}")));
    }
    if k > n {
        return Err(Error::Infeasible(format!("k = {k} exceeds vertex count {n}")));
    }
    let (lower, upper) = balance_bounds(n, k, epsilon)?;
    let p = penalty.resolve(g)?;
    let mut b = ModelBuilder::new();
    for v in 0..n {
        for part in 0..k {
            b.add_var(VarRole::Indicator { vertex: v, part });
        }
    }
    for (u, v) in g.edges() {
        for part in 0..k {
            b.linear[u * k + part] += 0.5;
            b.linear[v * k + part] += 0.5;
            b.add_quadratic(u * k + part, v * k + part, -1.0);
        }
    }
    for v in 0..n {
        b.groups.push(PenaltyGroup {
            vars: (v * k..(v + 1) * k).collect(),
            weights: vec![1.0; k],
            target: 1.0,
            scale: p,
        });
    }
    for part in 0..k {
        let indicators = (0..n).map(|v| v * k + part).collect();
        let group = balance_group(&mut b, part, indicators, lower, upper, p);
        b.groups.push(group);
    }
    let meta = PartitionMeta {
        k,
        epsilon,
        n,
        lower,
        upper,
        one_hot: true,
    };
    Ok(b.finish(p, Some(meta)))
}

impl QuboModel {
    /// Model from explicit coefficients; `(i, i, c)` entries fold into the
    /// linear term and repeated pairs are summed.
    pub fn from_terms<I>(num_vars: usize, constant: f64, linear: Vec<f64>, quadratic: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        if linear.len() != num_vars {
            return Err(Error::LengthMismatch {
                expected: num_vars,
                found: linear.len(),
            });
        }
        let mut b = ModelBuilder::new();
        b.constant = constant;
        b.linear = linear;
        b.var_map = vec![VarRole::Free; num_vars];
        for (i, j, c) in quadratic {
            if i >= num_vars || j >= num_vars {
                return Err(Error::InvalidArgument(format!(
                    "term ({i}, {j}) out of range for {num_vars} variables"
                )));
            }
            b.add_quadratic(i, j, c);
        }
        Ok(b.finish(1.0, None))
    }

    /// Adds `scale * (sum_i w_i a_i - target)^2` in factored form.
    pub fn with_penalty_group(mut self, group: PenaltyGroup) -> Result<Self> {
        if group.vars.len() != group.weights.len() {
            return Err(Error::LengthMismatch {
                expected: group.vars.len(),
                found: group.weights.len(),
            });
        }
        if let Some(&v) = group.vars.iter().find(|&&v| v >= self.num_vars) {
            return Err(Error::InvalidArgument(format!("group variable {v} out of range")));
        }
        // A repeated variable contributes the sum of its weights.
        let mut merged = PenaltyGroup { vars: Vec::new(), weights: Vec::new(), ..group };
        let mut slot = std::collections::HashMap::new();
        for (&v, &w) in group.vars.iter().zip(&group.weights) {
            match slot.entry(v) {
                std::collections::hash_map::Entry::Occupied(e) => merged.weights[*e.get()] += w,
                std::collections::hash_map::Entry::Vacant(e) => {
                    e.insert(merged.vars.len());
                    merged.vars.push(v);
                    merged.weights.push(w);
                }
            }
        }
        let g = self.groups.len();
        for (&v, &w) in merged.vars.iter().zip(&merged.weights) {
            self.memberships[v].push((g, w));
        }
        self.groups.push(merged);
        Ok(self)
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn penalty(&self) -> f64 {
        self.penalty
    }

    pub fn meta(&self) -> Option<&PartitionMeta> {
        self.meta.as_ref()
    }

    pub fn var_map(&self) -> &[VarRole] {
        &self.var_map
    }

    pub fn groups(&self) -> &[PenaltyGroup] {
        &self.groups
    }

    /// Off-diagonal terms touching variable `i`, with the other variable's index.
    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn memberships(&self, i: usize) -> &[(usize, f64)] {
        &self.memberships[i]
    }

    pub fn base_linear(&self, i: usize) -> f64 {
        self.base_linear[i]
    }

    /// Expanded constant offset.
    pub fn constant(&self) -> f64 {
        self.constant
            + self
                .groups
                .iter()
                .map(|g| g.scale * g.target * g.target)
                .sum::<f64>()
    }

    /// Expanded linear coefficients (using `a_i^2 = a_i`).
    pub fn linear(&self) -> Vec<f64> {
        let mut lin = self.base_linear.clone();
        for g in &self.groups {
            for (&v, &w) in g.vars.iter().zip(&g.weights) {
                lin[v] += g.scale * (w * w - 2.0 * g.target * w);
            }
        }
        lin
    }

    /// Expanded upper-triangular quadratic coefficients, zero entries omitted.
    pub fn quadratic(&self) -> BTreeMap<(usize, usize), f64> {
        let mut q = BTreeMap::new();
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, c) in row {
                if i < j {
                    *q.entry((i, j)).or_insert(0.0) += c;
                }
            }
        }
        for g in &self.groups {
            for a in 0..g.vars.len() {
                for b in a + 1..g.vars.len() {
                    let (i, j) = (g.vars[a], g.vars[b]);
                    let key = (i.min(j), i.max(j));
                    if i == j {
                        continue;
                    }
                    *q.entry(key).or_insert(0.0) += 2.0 * g.scale * g.weights[a] * g.weights[b];
                }
            }
        }
        q.retain(|_, c| *c != 0.0);
        q
    }

    /// Graph on the variables with an edge per nonzero quadratic coefficient.
    pub fn interaction_graph(&self) -> Graph {
        Graph::from_edges(self.num_vars, self.quadratic().into_keys())
            .expect("quadratic keys are in range")
            .0
    }

    fn check_len(&self, a: &Assignment) -> Result<()> {
        if a.len() != self.num_vars {
            return Err(Error::LengthMismatch {
                expected: self.num_vars,
                found: a.len(),
            });
        }
        Ok(())
    }

    /// Energy of `a`, evaluated from scratch.
    pub fn energy(&self, a: &Assignment) -> Result<f64> {
        self.check_len(a)?;
        let bits = a.bits();
        let mut e = self.constant;
        for (i, &bit) in bits.iter().enumerate() {
            if bit == 1 {
                e += self.base_linear[i];
                e += self.rows[i]
                    .iter()
                    .filter(|&&(j, _)| j > i && bits[j] == 1)
                    .map(|&(_, c)| c)
                    .sum::<f64>();
            }
        }
        for g in &self.groups {
            let r = self.group_sum(g, bits) - g.target;
            e += g.scale * r * r;
        }
        Ok(e)
    }

    fn group_sum(&self, g: &PenaltyGroup, bits: &[u8]) -> f64 {
        g.vars
            .iter()
            .zip(&g.weights)
            .filter(|(&v, _)| bits[v] == 1)
            .map(|(_, &w)| w)
            .sum()
    }

    /// Weighted sum of each penalty group under `a`.
    pub fn group_sums(&self, a: &Assignment) -> Vec<f64> {
        self.groups.iter().map(|g| self.group_sum(g, a.bits())).collect()
    }

    /// Vertex count and number of parts for partition models.
    fn partition_shape(&self) -> Result<(usize, usize)> {
        let meta = self
            .meta
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("model has no partition variable map".into()))?;
        Ok((meta.n, meta.k))
    }

    /// Index of the indicator of `(vertex, part)`, if the model has one.
    pub fn indicator_index(&self, vertex: usize, part: usize) -> Option<usize> {
        let meta = self.meta.as_ref()?;
        if vertex >= meta.n || part >= meta.k {
            return None;
        }
        match (meta.one_hot, part) {
            (true, _) => Some(vertex * meta.k + part),
            (false, 1) => Some(vertex),
            (false, _) => None,
        }
    }

    /// True for models with one indicator per vertex.
    pub fn is_bipartition(&self) -> bool {
        self.meta.is_some_and(|m| !m.one_hot)
    }

    /// Assignment encoding `p`: indicators from the labels and each slack
    /// chain set to its constraint's residual. Returns `false` alongside when
    /// some residual is out of the slack range (a part size outside the
    /// bounds), in which case that chain is clamped.
    pub fn encode_partition(&self, p: &Partition) -> Result<(Assignment, bool)> {
        let (n, k) = self.partition_shape()?;
        if p.len() != n || p.k() != k {
            return Err(Error::InvalidArgument(format!(
                "partition has {} vertices and {} parts, model expects {n} and {k}",
                p.len(),
                p.k()
            )));
        }
        let mut a = Assignment::zeros(self.num_vars);
        let bip = self.is_bipartition();
        for (v, &l) in p.labels().iter().enumerate() {
            if bip {
                a.set(v, l as u8);
            } else {
                a.set(v * k + l, 1);
            }
        }
        let meta = self.meta.unwrap();
        let sizes = p.part_sizes();
        let mut exact = true;
        let mut chains: BTreeMap<usize, Vec<(usize, u64)>> = BTreeMap::new();
        for (i, role) in self.var_map.iter().enumerate() {
            if let VarRole::Slack { part, weight } = *role {
                chains.entry(part).or_default().push((i, weight));
            }
        }
        for part in 0..k {
            let size = sizes[part];
            if bip && part == 0 {
                continue;
            }
            let range = meta.upper - meta.lower;
            let residual = if size > meta.upper || size < meta.lower {
                exact = false;
                meta.upper.saturating_sub(size).min(range)
            } else {
                meta.upper - size
            };
            let chain = chains.get(&part).map(Vec::as_slice).unwrap_or(&[]);
            let weights: Vec<u64> = chain.iter().map(|&(_, w)| w).collect();
            for (&(var, _), bit) in chain.iter().zip(slack_bits(&weights, residual as u64)) {
                a.set(var, bit);
            }
        }
        Ok((a, exact))
    }

    /// Uniformly shuffled partition with part sizes as equal as possible,
    /// encoded with exact slack.
    pub fn balanced_assignment<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Assignment> {
        let (n, k) = self.partition_shape()?;
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let mut labels = vec![0; n];
        for (pos, &v) in order.iter().enumerate() {
            labels[v] = pos % k;
        }
        let p = Partition::new(labels, k)?;
        Ok(self.encode_partition(&p)?.0)
    }
}

/// Text QUBO format:
///
/// ```text
/// p qubo <num_vars> <num_terms>
/// c offset <constant>
/// c meta k=<k> epsilon=<eps> n=<n> lower=<l> upper=<u> penalty=<P>
/// c var <i> x <vertex> <part>
/// c var <i> s <part> <weight>
/// <i> <j> <coeff>
/// ```
///
/// Indices are 0-based, `i <= j`, and `i == j` lines are linear terms. The
/// `meta` and `var` comment lines are optional and restore the variable map.
pub mod text {
    use super::*;

    pub fn write_qubo(model: &QuboModel) -> String {
        let lin = model.linear();
        let quad = model.quadratic();
        let num_terms = lin.iter().filter(|&&c| c != 0.0).count() + quad.len();
        let mut out = String::new();
        writeln!(out, "p qubo {} {}", model.num_vars(), num_terms).unwrap();
        writeln!(out, "c offset {}", model.constant()).unwrap();
        if let Some(m) = model.meta() {
            writeln!(
                out,
                "c meta k={} epsilon={} n={} lower={} upper={} penalty={} layout={}",
                m.k,
                m.epsilon,
                m.n,
                m.lower,
                m.upper,
                model.penalty(),
                if m.one_hot { "onehot" } else { "binary" }
            )
            .unwrap();
            for (i, role) in model.var_map().iter().enumerate() {
                match *role {
                    VarRole::Indicator { vertex, part } => {
                        writeln!(out, "c var {i} x {vertex} {part}").unwrap()
                    }
                    VarRole::Slack { part, weight } => {
                        writeln!(out, "c var {i} s {part} {weight}").unwrap()
                    }
                    VarRole::Free => {}
                }
            }
        }
        for (i, &c) in lin.iter().enumerate() {
            if c != 0.0 {
                writeln!(out, "{i} {i} {c}").unwrap();
            }
        }
        for ((i, j), c) in quad {
            writeln!(out, "{i} {j} {c}").unwrap();
        }
        out
    }

    pub fn parse_qubo(text: &str) -> Result<QuboModel> {
        let mut header: Option<(usize, usize)> = None;
        let mut constant = 0.0;
        let mut meta_fields: BTreeMap<String, String> = BTreeMap::new();
        let mut roles: BTreeMap<usize, VarRole> = BTreeMap::new();
        let mut terms = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let tok: Vec<&str> = line.split_whitespace().collect();
            let bad = |msg: &str| Error::parse(line_no, msg.to_string());
            match tok.first().copied() {
                None => continue,
                Some("p") => {
                    if tok.len() != 4 || tok[1] != "qubo" {
                        return Err(bad("header must be `p qubo <num_vars> <num_terms>`"));
                    }
                    let nv = tok[2].parse().map_err(|_| bad("invalid variable count"))?;
                    let nt = tok[3].parse().map_err(|_| bad("invalid term count"))?;
                    header = Some((nv, nt));
                }
                Some("c") => match tok.get(1).copied() {
                    Some("offset") => {
                        constant = tok
                            .get(2)
                            .and_then(|s| s.parse().ok())
                            .ok_or_else(|| bad("invalid offset"))?;
                    }
                    Some("meta") => {
                        for kv in &tok[2..] {
                            if let Some((k, v)) = kv.split_once('=') {
                                meta_fields.insert(k.to_string(), v.to_string());
                            }
                        }
                    }
                    Some("var") if tok.len() == 6 => {
                        let nums: Vec<u64> = [tok[2], tok[4], tok[5]]
                            .iter()
                            .map(|s| s.parse::<u64>())
                            .collect::<std::result::Result<_, _>>()
                            .map_err(|_| bad("invalid variable annotation"))?;
                        let role = match tok[3] {
                            "x" => VarRole::Indicator {
                                vertex: nums[1] as usize,
                                part: nums[2] as usize,
                            },
                            "s" => VarRole::Slack {
                                part: nums[1] as usize,
                                weight: nums[2],
                            },
                            _ => return Err(bad("variable kind must be `x` or `s`")),
                        };
                        roles.insert(nums[0] as usize, role);
                    }
                    _ => {}
                },
                Some(_) => {
                    if header.is_none() {
                        return Err(bad("term before `p qubo` header"));
                    }
                    if tok.len() != 3 {
                        return Err(bad("term must be `i j coeff`"));
                    }
                    let i: usize = tok[0].parse().map_err(|_| bad("invalid index"))?;
                    let j: usize = tok[1].parse().map_err(|_| bad("invalid index"))?;
                    let c: f64 = tok[2].parse().map_err(|_| bad("invalid coefficient"))?;
                    if i > j {
                        return Err(bad("terms must satisfy i <= j"));
                    }
                    terms.push((line_no, i, j, c));
                }
            }
        }
        let (num_vars, num_terms) = header.ok_or_else(|| Error::parse(1, "missing `p qubo` header"))?;
        if terms.len() != num_terms {
            return Err(Error::parse(
                1,
                format!("header declares {num_terms} terms but {} found", terms.len()),
            ));
        }
        let mut linear = vec![0.0; num_vars];
        let mut quadratic = Vec::new();
        for (line_no, i, j, c) in terms {
            if j >= num_vars {
                return Err(Error::parse(line_no, format!("index {j} out of range")));
            }
            if i == j {
                linear[i] += c;
            } else {
                quadratic.push((i, j, c));
            }
        }
        let mut model = QuboModel::from_terms(num_vars, constant, linear, quadratic)?;
        if !meta_fields.is_empty() {
            let get = |key: &str| -> Result<f64> {
                meta_fields
                    .get(key)
                    .and_then(|v| v.parse::<f64>().ok())
                    .ok_or_else(|| Error::parse(1, format!("meta line lacks `{key}`")))
            };
            model.meta = Some(PartitionMeta {
                k: get("k")? as usize,
                epsilon: get("epsilon")?,
                n: get("n")? as usize,
                lower: get("lower")? as usize,
                upper: get("upper")? as usize,
                one_hot: meta_fields.get("layout").map(String::as_str) != Some("binary"),
            });
            model.penalty = get("penalty")?;
            for (i, role) in roles {
                if i >= num_vars {
                    return Err(Error::parse(1, format!("annotated variable {i} out of range")));
                }
                model.var_map[i] = role;
            }
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::text::*;
    use super::*;

    #[test]
    fn repeated_group_variables_merge() {
        let m = QuboModel::from_terms(2, 0.0, vec![0.0; 2], [])
            .unwrap()
            .with_penalty_group(PenaltyGroup { vars: vec![0, 1, 0], weights: vec![1.0, 1.0, 2.0], target: 3.0, scale: 1.0 })
            .unwrap();
        assert_eq!(m.groups()[0].vars, vec![0, 1]);
        assert_eq!(m.groups()[0].weights, vec![3.0, 1.0]);
        assert_eq!(m.energy(&Assignment::from_bits(vec![1, 0]).unwrap()).unwrap(), 0.0);
        assert_eq!(m.energy(&Assignment::from_bits(vec![1, 1]).unwrap()).unwrap(), 1.0);
    }

    #[test]
    fn interaction_graph_follows_quadratic_terms() {
        let m = QuboModel::from_terms(4, 0.0, vec![1.0; 4], [(0, 2, 3.0), (2, 0, -3.0), (1, 3, 1.0)]).unwrap();
        let g = m.interaction_graph();
        assert_eq!(g.edges(), vec![(1, 3)]);
        let p4 = build_bipartition_qubo(&crate::graph::generators::path(4), 0.0, Penalty::Auto).unwrap();
        assert_eq!(p4.interaction_graph().m(), 6);
    }
    use crate::graph::generators::*;
    use crate::graph::cut_edges;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn bits(b: &[u8]) -> Assignment {
        Assignment::from_bits(b.to_vec()).unwrap()
    }

    /// Every subset sum of `weights`.
    fn subset_sums(weights: &[u64]) -> Vec<u64> {
        let mut sums = vec![0u64];
        for &w in weights {
            let shifted: Vec<u64> = sums.iter().map(|s| s + w).collect();
            sums.extend(shifted);
        }
        sums.sort_unstable();
        sums.dedup();
        sums
    }

    #[test]
    fn slack_weight_examples() {
        assert!(encode_slack_weights(0).is_empty());
        assert_eq!(encode_slack_weights(1), vec![1]);
        assert_eq!(encode_slack_weights(5), vec![1, 2, 2]);
        assert_eq!(encode_slack_weights(7), vec![1, 2, 4]);
        assert_eq!(encode_slack_weights(11), vec![1, 2, 4, 4]);
        assert_eq!(subset_sums(&[1, 2, 4, 4]), (0..=11).collect::<Vec<_>>());
    }

    #[test]
    fn slack_bits_hit_every_value() {
        for range in 0..200u64 {
            let w = encode_slack_weights(range);
            for value in 0..=range {
                let b = slack_bits(&w, value);
                let sum: u64 = w.iter().zip(&b).map(|(w, &b)| w * b as u64).sum();
                assert_eq!(sum, value, "range {range}");
            }
        }
    }

    #[test]
    fn k2_energy_examples() {
        let g = path(2);
        let m = build_bipartition_qubo(&g, 0.0, Penalty::Fixed(2.0)).unwrap();
        assert_eq!(m.num_vars(), 2);
        assert_eq!(m.energy(&bits(&[1, 0])).unwrap(), 1.0);
        assert_eq!(m.energy(&bits(&[1, 1])).unwrap(), 2.0);
        assert_eq!(m.energy(&bits(&[0, 0])).unwrap(), 2.0);
        assert_eq!(m.energy(&Assignment::zeros(2)).unwrap(), m.constant());
        assert!(m.energy(&bits(&[1])).is_err());
    }

    fn brute_min(m: &QuboModel) -> f64 {
        let nv = m.num_vars();
        (0..1u64 << nv)
            .map(|mask| {
                let b: Vec<u8> = (0..nv).map(|i| ((mask >> i) & 1) as u8).collect();
                m.energy(&Assignment(b)).unwrap()
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn p4_brute_force_minimum() {
        let m = build_bipartition_qubo(&path(4), 0.0, Penalty::Auto).unwrap();
        assert_eq!(brute_min(&m), 1.0);
        assert_eq!(m.energy(&bits(&[1, 1, 0, 0])).unwrap(), 1.0);
    }

    #[test]
    fn kway_examples() {
        let g = complete(3);
        let m = build_kway_qubo(&g, 3, 0.0, Penalty::Fixed(10.0)).unwrap();
        assert_eq!(m.num_vars(), 9);
        let own = bits(&[1, 0, 0, 0, 1, 0, 0, 0, 1]);
        assert_eq!(m.energy(&own).unwrap(), 3.0);
        // Vertex 0 also in part 1: one-hot residual 1, part 1 over by one,
        // and the objective loses the 0-1 edge in part 1.
        let double = bits(&[1, 1, 0, 0, 1, 0, 0, 0, 1]);
        let objective = 0.5 * (2.0 + 2.0 + 2.0);
        assert_eq!(m.energy(&double).unwrap(), objective + 10.0 + 10.0);
        assert!(build_kway_qubo(&g, 4, 0.0, Penalty::Auto).is_err());
        assert!(build_kway_qubo(&g, 1, 0.0, Penalty::Auto).is_err());
    }

    #[test]
    fn p6_three_way_feasible_minimum() {
        let g = path(6);
        let m = build_kway_qubo(&g, 3, 0.0, Penalty::Auto).unwrap();
        let mut best = f64::INFINITY;
        for code in 0..3usize.pow(6) {
            let labels: Vec<usize> = (0..6).map(|i| code / 3usize.pow(i) % 3).collect();
            let p = Partition::new(labels, 3).unwrap();
            if p.part_sizes().iter().all(|&s| s == 2) {
                let (a, exact) = m.encode_partition(&p).unwrap();
                assert!(exact);
                best = best.min(m.energy(&a).unwrap());
            }
        }
        assert_eq!(best, 2.0);
    }

    #[test]
    fn default_penalty_examples() {
        assert_eq!(default_penalty(&Graph::from_edges(3, []).unwrap().0), 1.0);
        assert_eq!(default_penalty(&complete(4)), 4.0);
        assert_eq!(default_penalty(&star(5)), 6.0);
    }

    #[test]
    fn penalty_parsing() {
        assert_eq!("auto".parse::<Penalty>().unwrap(), Penalty::Auto);
        assert_eq!("2.5".parse::<Penalty>().unwrap(), Penalty::Fixed(2.5));
        assert!("0".parse::<Penalty>().is_err());
        assert!("-1".parse::<Penalty>().is_err());
        assert!(build_bipartition_qubo(&path(4), 0.0, Penalty::Fixed(-1.0)).is_err());
        assert!(build_bipartition_qubo(&path(4), -0.5, Penalty::Auto).is_err());
    }

    #[test]
    fn imbalanced_model_has_slack_chain() {
        // n = 10, eps = 0.2: upper = 6, lower = 4, slack covers 0..=2.
        let m = build_bipartition_qubo(&path(10), 0.2, Penalty::Auto).unwrap();
        assert_eq!(m.num_vars(), 12);
        let slack: Vec<_> = m.var_map()[10..].to_vec();
        assert_eq!(
            slack,
            vec![VarRole::Slack { part: 1, weight: 1 }, VarRole::Slack { part: 1, weight: 1 }]
        );
        // All-zero indicators (an empty part) cannot be made feasible.
        let mut a = Assignment::zeros(12);
        a.set(10, 1);
        a.set(11, 1);
        assert!(m.energy(&a).unwrap() >= m.penalty());
    }

    /// Dense upper-triangular evaluation of the expanded coefficients.
    fn dense_energy(m: &QuboModel, a: &Assignment) -> f64 {
        let nv = m.num_vars();
        let mut q = vec![vec![0.0; nv]; nv];
        for (i, c) in m.linear().into_iter().enumerate() {
            q[i][i] = c;
        }
        for ((i, j), c) in m.quadratic() {
            q[i][j] = c;
        }
        let x: Vec<f64> = a.bits().iter().map(|&b| b as f64).collect();
        let mut e = m.constant();
        for i in 0..nv {
            for j in i..nv {
                e += q[i][j] * x[i] * x[j];
            }
        }
        e
    }

    #[test]
    fn random_model_matches_dense_reference() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let lin: Vec<f64> = (0..12).map(|_| rng.random_range(-5..=5) as f64).collect();
            let quad: Vec<(usize, usize, f64)> = (0..30)
                .map(|_| (rng.random_range(0..12), rng.random_range(0..12), rng.random_range(-4..=4) as f64))
                .collect();
            let m = QuboModel::from_terms(12, 3.0, lin, quad)
                .unwrap()
                .with_penalty_group(PenaltyGroup {
                    vars: vec![0, 3, 5, 7],
                    weights: vec![1.0, 2.0, 1.0, 3.0],
                    target: 4.0,
                    scale: 2.0,
                })
                .unwrap();
            for _ in 0..20 {
                let a = Assignment((0..12).map(|_| rng.random_range(0..2)).collect());
                assert_eq!(m.energy(&a).unwrap(), dense_energy(&m, &a));
            }
        }
    }

    #[test]
    fn qubo_text_round_trip_keeps_roles() {
        let m = build_kway_qubo(&cycle(7), 3, 0.1, Penalty::Auto).unwrap();
        let text = write_qubo(&m);
        assert!(text.starts_with(&format!("p qubo {} ", m.num_vars())));
        let back = parse_qubo(&text).unwrap();
        assert_eq!(back.num_vars(), m.num_vars());
        assert_eq!(back.constant(), m.constant());
        assert_eq!(back.linear(), m.linear());
        assert_eq!(back.quadratic(), m.quadratic());
        assert_eq!(back.var_map(), m.var_map());
        assert_eq!(back.meta(), m.meta());
        assert_eq!(back.penalty(), m.penalty());
        assert!(back.is_bipartition() == m.is_bipartition());
    }

    #[test]
    fn qubo_text_errors() {
        assert!(parse_qubo("0 0 1\n").is_err());
        assert!(parse_qubo("p qubo 2 1\n1 0 1\n").is_err());
        assert!(parse_qubo("p qubo 2 2\n0 0 1\n").is_err());
        assert!(parse_qubo("p qubo 2 1\n0 5 1\n").is_err());
        let plain = parse_qubo("p qubo 2 2\nc offset -1\n0 0 3\n0 1 -2\n").unwrap();
        assert_eq!(plain.energy(&bits(&[1, 1])).unwrap(), 0.0);
        assert!(plain.meta().is_none());
    }

    #[test]
    fn bipartition_detection() {
        assert!(build_bipartition_qubo(&path(4), 0.0, Penalty::Auto).unwrap().is_bipartition());
        assert!(!build_kway_qubo(&path(4), 2, 0.0, Penalty::Auto).unwrap().is_bipartition());
    }

    proptest! {
        #[test]
        fn feasible_assignments_score_their_cut(seed in any::<u64>(), n in 2usize..24, k in 2usize..5, eps_pct in 0u32..12) {
            prop_assume!(k <= n);
            let eps = eps_pct as f64 / 100.0;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let g = gnp(n, 0.3, &mut rng);
            let models = if k == 2 {
                vec![build_bipartition_qubo(&g, eps, Penalty::Auto).unwrap(), build_kway_qubo(&g, 2, eps, Penalty::Auto).unwrap()]
            } else {
                vec![build_kway_qubo(&g, k, eps, Penalty::Auto).unwrap()]
            };
            for m in models {
                let a = m.balanced_assignment(&mut rng).unwrap();
                let labels: Vec<usize> = (0..n).map(|v| if m.is_bipartition() { a.get(v) as usize } else { (0..k).find(|&j| a.get(v * k + j) == 1).unwrap() }).collect();
                let p = Partition::new(labels, k).unwrap();
                prop_assert_eq!(m.energy(&a).unwrap(), cut_edges(&g, &p).unwrap() as f64);
                for c in m.linear().iter().chain(m.quadratic().values()) {
                    prop_assert_eq!((c * 2.0).fract(), 0.0);
                }
            }
        }

        #[test]
        fn even_bipartition_energy_is_complement_symmetric(seed in any::<u64>(), half in 1usize..8) {
            let n = 2 * half;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let g = gnp(n, 0.4, &mut rng);
            let m = build_bipartition_qubo(&g, 0.0, Penalty::Auto).unwrap();
            let a = Assignment((0..n).map(|_| rng.random_range(0..2)).collect());
            prop_assert_eq!(m.energy(&a).unwrap(), m.energy(&a.complement()).unwrap());
            for c in m.linear().iter().chain(m.quadratic().values()) {
                prop_assert_eq!(c.fract(), 0.0);
            }
        }
    }
}
