//! Deterministic federated-learning simulator.
//!
//! Small dense networks, synthetic or file-backed feature datasets,
//! Dirichlet client partitions, seven training strategies, an analytic
//! compute/communication cost model and a threshold-based evaluation
//! protocol. Every random draw comes from a labeled substream of one master
//! seed, so results are reproducible bit for bit.

pub mod algorithm;
pub mod cli;
pub mod cost;
pub mod data;
pub mod engine;
pub mod error;
pub mod eval;
pub mod fsutil;
pub mod nn;
pub mod rng;
pub mod vertical;

pub use algorithm::AlgorithmKind;
pub use error::{Error, Result};
