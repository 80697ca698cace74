//! Topological cluster state under qubit loss: stabilizer derivations,
//! lattice construction, fault sampling, superstabilizer merging, matching
//! decoder, continuous Monte Carlo and overhead analysis.

pub mod analysis;
pub mod cli;
pub mod decoder;
pub mod error;
pub mod errmodel;
pub mod lattice;
pub mod matching;
pub mod montecarlo;
pub mod pauli;
pub mod rng;
pub mod syndrome;

pub use error::{Error, Result};
