//! Online stochastic bipartite matching with patience and commitment.
//!
//! The crate houses the LP relaxations of the committal benchmark (including
//! the tuple-variable LP solved by column generation), the non-adaptive
//! probing algorithms for adversarial, random-order and known-i.i.d.
//! arrivals, exact brute-force benchmarks for tiny instances, and a seeded
//! Monte Carlo harness to compare them.

pub mod algorithms;
pub mod benchmarks;
pub mod error;
pub mod formulations;
pub mod graph;
pub mod lp;
pub mod pricing;
pub mod probing;
pub mod rng;
pub mod simulate;

pub use error::{Error, Result};
pub use graph::{
    paper_example, EdgeStateSample, Fixture, Instance, InstantiatedGraph, StochasticGraph,
    TypeGraphInstance, WeightMode,
};
pub use lp::{LinearProgram, LpSolution, LpStatus};
