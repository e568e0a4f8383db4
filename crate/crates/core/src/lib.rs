//! Balanced and imbalanced k-way graph partitioning compiled to QUBO models.
//!
//! The pipeline is: load a [`Graph`], build a [`QuboModel`] with
//! [`qubo::build_bipartition_qubo`] or [`qubo::build_kway_qubo`], solve it
//! with [`anneal::solve`], then [`evaluate::decode`] and [`evaluate::repair`]
//! the best assignment into a feasible [`Partition`].

pub mod anneal;
pub mod bench;
pub mod error;
pub mod evaluate;
pub mod graph;
pub mod io;
pub mod qubo;
pub mod rng;
pub mod sparsify;

pub use anneal::{AnnealConfig, Schedule, SolveResult};
pub use error::{Error, Result};
pub use evaluate::Feasibility;
pub use graph::{balance_bounds, cut_edges, Graph, Partition};
pub use qubo::{Assignment, Penalty, QuboModel, VarRole};
