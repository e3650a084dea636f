//! Deterministic simulator of a gossip-restricted synchronous network
//! running queueing-based Laplacian solvers.
//!
//! The crate layers up from a weighted-graph core and dense exact oracles,
//! through the round engine and the Data Collection queue process, to the
//! binary-search solver, effective-resistance and multi-sink front ends, and
//! a random-spanning-tree sampler built from low-diameter decomposition,
//! exit distributions, and a reduced-graph random walk.

pub mod dc;
pub mod engine;
pub mod error;
pub mod graph;
pub mod oracle;
pub mod par;
pub mod rng;
pub mod rst;
pub mod solver;

pub use error::{Error, Result};
