//! Deterministic round-based simulator for delay-tolerant gossip optimization
//! (DT-GO) on directed, possibly time-varying communication graphs.
//!
//! Nodes gossip with row-stochastic weight matrices built from local in-degree
//! knowledge only. Communication delays are modeled by splicing virtual relay
//! nodes into the graph, and a decentralized warm-up phase estimates the
//! influence correction each node needs so that gossiped SGD descends the true
//! global average objective. Everything is seeded; identical seeds reproduce
//! identical traces byte for byte.

pub mod experiment;
pub mod gossip;
pub mod graph;
pub mod metrics;
pub mod objective;
pub mod optim;
pub mod selftest;
pub mod stream;
#[cfg(test)]
pub(crate) mod testkit;
pub mod warmup;

use thiserror::Error;

/// Crate-wide error type. Variants carry enough context to diagnose a failed
/// run from the message alone (round and node indices, file line numbers).
#[derive(Debug, Error)]
pub enum Error {
    #[error("gilbert graph with n={n}, p={p} not strongly connected after {attempts} attempts")]
    GilbertRetriesExhausted { n: usize, p: f64, attempts: usize },

    #[error("graph is not strongly connected")]
    NotStronglyConnected,

    #[error("delayed edge {src}->{dst} is not present in the graph")]
    DelayedEdgeMissing { src: usize, dst: usize },

    #[error("delay on self-loop {node}->{node} is not representable")]
    DelayedSelfLoop { node: usize },

    #[error("power limit did not converge after {squarings} squarings (last delta {delta:.3e})")]
    PowerLimitDiverged { squarings: usize, delta: f64 },

    #[error("mixing time exceeds {cap} rounds (squared norm still {norm:.3e})")]
    MixingTimeExceeded { cap: usize, norm: f64 },

    #[error("warm-up failed at node {node}: {reason}")]
    WarmupFailed { node: usize, reason: String },

    #[error("divergence at round {round}, node {node}: {value}")]
    Divergence { round: usize, node: usize, value: f64 },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{failed} of {total} replications aborted (limit is 10%)")]
    TooManyAborts { failed: usize, total: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
