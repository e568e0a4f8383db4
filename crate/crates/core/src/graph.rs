//! Undirected unweighted graphs, partitions, and cut arithmetic.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Undirected, unweighted simple graph in CSR form.
///
/// Vertices are `0..n`. Neighbor lists are sorted and free of duplicates and
/// self-loops. Every undirected edge `{u, v}` with `u < v` has an id in
/// `0..m`; ids follow lexicographic `(u, v)` order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    xadj: Vec<usize>,
    adjncy: Vec<usize>,
    /// Edge id of each adjacency entry, aligned with `adjncy`.
    adj_edge: Vec<usize>,
    m: usize,
    name: Option<String>,
}

/// Counts of input irregularities dropped while building a graph.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BuildReport {
    pub self_loops: usize,
    pub duplicates: usize,
}

impl Graph {
    /// Builds a graph from an edge list, merging duplicates (in either
    /// orientation) and dropping self-loops.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<(Self, BuildReport)>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut report = BuildReport::default();
        let mut pairs = Vec::new();
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({u}, {v}) out of range for {n} vertices"
                )));
            }
            if u == v {
                report.self_loops += 1;
                continue;
            }
            pairs.push((u.min(v), u.max(v)));
        }
        pairs.sort_unstable();
        let before = pairs.len();
        pairs.dedup();
        report.duplicates = before - pairs.len();
        Ok((Self::from_sorted_unique_edges(n, &pairs), report))
    }

    /// Builds a graph from per-vertex neighbor lists, which must already be
    /// symmetric and loop-free. Duplicate entries within a list are merged.
    pub fn from_adjacency(lists: &[Vec<usize>]) -> Result<Self> {
        let n = lists.len();
        let mut pairs = Vec::new();
        for (u, list) in lists.iter().enumerate() {
            for &v in list {
                if v >= n {
                    return Err(Error::InvalidGraph(format!(
                        "neighbor {v} of vertex {u} out of range"
                    )));
                }
                if v == u {
                    return Err(Error::InvalidGraph(format!("self-loop at vertex {u}")));
                }
                pairs.push((u, v));
            }
        }
        pairs.sort_unstable();
        pairs.dedup();
        for &(u, v) in &pairs {
            if pairs.binary_search(&(v, u)).is_err() {
                return Err(Error::InvalidGraph(format!(
                    "asymmetric adjacency: {v} listed for {u} but not {u} for {v}"
                )));
            }
        }
        let forward: Vec<(usize, usize)> = pairs.into_iter().filter(|&(u, v)| u < v).collect();
        Ok(Self::from_sorted_unique_edges(n, &forward))
    }

    fn from_sorted_unique_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut degree = vec![0usize; n];
        for &(u, v) in edges {
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut xadj = Vec::with_capacity(n + 1);
        xadj.push(0);
        for d in &degree {
            xadj.push(xadj.last().unwrap() + d);
        }
        let mut fill = xadj[..n].to_vec();
        let mut adjncy = vec![0; 2 * edges.len()];
        let mut adj_edge = vec![0; 2 * edges.len()];
        // Edges are visited in lexicographic order, so every list ends up sorted.
        for (id, &(u, v)) in edges.iter().enumerate() {
            adjncy[fill[u]] = v;
            adj_edge[fill[u]] = id;
            fill[u] += 1;
        }
        for (id, &(u, v)) in edges.iter().enumerate() {
            adjncy[fill[v]] = u;
            adj_edge[fill[v]] = id;
            fill[v] += 1;
        }
        for u in 0..n {
            let (lo, hi) = (xadj[u], xadj[u + 1]);
            let mut entries: Vec<(usize, usize)> =
                (lo..hi).map(|p| (adjncy[p], adj_edge[p])).collect();
            entries.sort_unstable();
            for (p, (v, e)) in (lo..hi).zip(entries) {
                adjncy[p] = v;
                adj_edge[p] = e;
            }
        }
        Graph {
            xadj,
            adjncy,
            adj_edge,
            m: edges.len(),
            name: None,
        }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn n(&self) -> usize {
        self.xadj.len() - 1
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.adjncy[self.xadj[u]..self.xadj[u + 1]]
    }

    /// Neighbors of `u` paired with the id of the connecting edge.
    pub fn incident(&self, u: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        let range = self.xadj[u]..self.xadj[u + 1];
        self.adjncy[range.clone()]
            .iter()
            .copied()
            .zip(self.adj_edge[range].iter().copied())
    }

    pub fn degree(&self, u: usize) -> usize {
        self.xadj[u + 1] - self.xadj[u]
    }

    pub fn max_degree(&self) -> usize {
        (0..self.n()).map(|u| self.degree(u)).max().unwrap_or(0)
    }

    /// `m / n`, the density measure used by the Walshaw tables.
    pub fn avg_degree(&self) -> f64 {
        if self.n() == 0 {
            0.0
        } else {
            self.m as f64 / self.n() as f64
        }
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Edges `(u, v)` with `u < v`, in id order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = vec![(0, 0); self.m];
        for u in 0..self.n() {
            for (v, e) in self.incident(u) {
                if u < v {
                    out[e] = (u, v);
                }
            }
        }
        out
    }

    /// Subgraph on the same vertex set keeping the edges whose ids are in `keep`.
    pub fn edge_subgraph(&self, keep: &[usize]) -> Self {
        let all = self.edges();
        let mut kept: Vec<(usize, usize)> = keep.iter().map(|&e| all[e]).collect();
        kept.sort_unstable();
        kept.dedup();
        let mut g = Self::from_sorted_unique_edges(self.n(), &kept);
        g.name = self.name.clone();
        g
    }

    /// Evaluates `x^T L x` with `L = D - A`, i.e. the sum of `(x_u - x_v)^2`
    /// over edges.
    pub fn laplacian_form(&self, x: &[f64]) -> f64 {
        self.edges()
            .iter()
            .map(|&(u, v)| (x[u] - x[v]) * (x[u] - x[v]))
            .sum()
    }
}

/// Per-vertex part labels in `0..k`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    labels: Vec<usize>,
    k: usize,
}

impl Partition {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("partition needs k >= 1".into()));
        }
        if let Some((v, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= k) {
            return Err(Error::InvalidArgument(format!(
                "vertex {v} has label {l} >= k = {k}"
            )));
        }
        Ok(Partition { labels, k })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn part_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    pub(crate) fn set(&mut self, v: usize, part: usize) {
        self.labels[v] = part;
    }

    /// Swaps labels 0 and 1 of a bipartition.
    pub fn complement(&self) -> Self {
        assert_eq!(self.k, 2, "complement is defined for bipartitions");
        Partition {
            labels: self.labels.iter().map(|&l| 1 - l).collect(),
            k: 2,
        }
    }
}

/// Number of edges whose endpoints carry different labels.
pub fn cut_edges(g: &Graph, p: &Partition) -> Result<usize> {
    if p.len() != g.n() {
        return Err(Error::LengthMismatch {
            expected: g.n(),
            found: p.len(),
        });
    }
    let labels = p.labels();
    Ok((0..g.n())
        .map(|u| {
            g.neighbors(u)
                .iter()
                .filter(|&&v| u < v && labels[u] != labels[v])
                .count()
        })
        .sum())
}

/// Slack for float products such as `1.07 * 100` landing a hair off an integer.
const ROUNDING_SLACK: f64 = 1e-9;

/// Inclusive `(lower, upper)` bounds on every part's size.
///
/// `upper = floor((1 + eps) * ceil(n / k))`, clamped to `n`. For `k = 2` the
/// lower bound is the one implied by the other part's upper bound,
/// `n - upper`. For `k > 2` it is `ceil((1 - eps) * ceil(n / k))`, capped at
/// `floor(n / k)` so that the bounds always admit a partition.
pub fn balance_bounds(n: usize, k: usize, epsilon: f64) -> Result<(usize, usize)> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k must be >= 2, got {k}")));
    }
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "imbalance must be a finite non-negative number, got {epsilon}"
        )));
    }
    let target = n.div_ceil(k) as f64;
    let upper = (((1.0 + epsilon) * target + ROUNDING_SLACK).floor() as usize).min(n);
    let lower = if k == 2 {
        n - upper
    } else {
        let raw = ((1.0 - epsilon) * target - ROUNDING_SLACK).ceil().max(0.0) as usize;
        raw.min(n / k)
    };
    Ok((lower, upper))
}

/// Small deterministic and random graph families for tests and demos.
pub mod generators {
    use super::*;

    pub fn path(n: usize) -> Graph {
        Graph::from_edges(n, (1..n).map(|i| (i - 1, i))).unwrap().0
    }

    pub fn cycle(n: usize) -> Graph {
        Graph::from_edges(n, (0..n).map(|i| (i, (i + 1) % n))).unwrap().0
    }

    pub fn complete(n: usize) -> Graph {
        let edges = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v)));
        Graph::from_edges(n, edges).unwrap().0
    }

    /// Star with vertex 0 at the center and `leaves` leaves.
    pub fn star(leaves: usize) -> Graph {
        Graph::from_edges(leaves + 1, (1..=leaves).map(|i| (0, i)))
            .unwrap()
            .0
    }

    pub fn grid(rows: usize, cols: usize) -> Graph {
        let id = |r: usize, c: usize| r * cols + c;
        let mut edges = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                if c + 1 < cols {
                    edges.push((id(r, c), id(r, c + 1)));
                }
                if r + 1 < rows {
                    edges.push((id(r, c), id(r + 1, c)));
                }
            }
        }
        Graph::from_edges(rows * cols, edges).unwrap().0
    }

    /// Erdos-Renyi `G(n, p)`.
    pub fn gnp<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Graph {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.random::<f64>() < p {
                    edges.push((u, v));
                }
            }
        }
        Graph::from_edges(n, edges).unwrap().0
    }

    /// Random geometric graph in the unit square; returns the vertex positions too.
    pub fn random_geometric<R: Rng + ?Sized>(
        n: usize,
        radius: f64,
        rng: &mut R,
    ) -> (Graph, Vec<(f64, f64)>) {
        let pts: Vec<(f64, f64)> = (0..n)
            .map(|_| (rng.random::<f64>(), rng.random::<f64>()))
            .collect();
        let r2 = radius * radius;
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                let (dx, dy) = (pts[u].0 - pts[v].0, pts[u].1 - pts[v].1);
                if dx * dx + dy * dy <= r2 {
                    edges.push((u, v));
                }
            }
        }
        (Graph::from_edges(n, edges).unwrap().0, pts)
    }
}
