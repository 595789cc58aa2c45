//! Collaborative pure exploration in kernel bandits.
//!
//! `V` agents each face a best-arm-identification task. Rewards are linear in
//! an implicit feature map defined by a product composite kernel
//! `K((x,z),(x',z')) = K_Z(z,z') * K_X(x,x')`, where `K_Z` encodes task
//! similarity and `K_X` arm similarity. Agents sample locally and exchange
//! per-arm `(count, mean)` summaries in synchronized communication rounds.
//!
//! The crate provides:
//!
//! - [`kernel`]: composite kernel evaluation, weighted Gram matrices, and the
//!   kernel-trick identities for regularized pair norms.
//! - [`design`]: the min-max allocation solver, simplex projection, the
//!   regularization-parameter search, deterministic rounding, and the
//!   principle dimension.
//! - [`estimation`]: kernelized regularized least squares from observation
//!   summaries.
//! - [`protocol`]: the simulated environment and the round-synchronous
//!   message bus with payload accounting.
//! - [`algorithms`]: the fixed-confidence and fixed-budget elimination
//!   algorithms plus the single-agent / uniform / individual-allocation
//!   baselines.
//! - [`diagnostics`]: instance hardness, maximum information gain, effective
//!   dimension, rank decomposition, and empirical speedup.
//! - [`config`]: the TOML experiment configuration consumed by the CLI.
//! - [`oracle`]: explicit-feature reference implementations used by the
//!   verification suite; independent of the kernelized code paths.

#![forbid(unsafe_code)]

use thiserror::Error;

pub mod algorithms;
pub mod config;
pub mod design;
pub mod diagnostics;
pub mod estimation;
pub mod kernel;
pub mod oracle;
pub mod protocol;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed inputs: dimension mismatches, invalid kernels, bad config values.
    #[error("configuration error: {0}")]
    Config(String),
    /// An operation was called outside its contract.
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// A linear-algebra step failed even after jitter.
    #[error("numerical error: {0}")]
    Numerical(String),
    /// A message violated the communication contract.
    #[error("protocol violation: {0}")]
    Protocol(String),
    /// Rounding verification failed after repair attempts.
    #[error("rounding error: {0}")]
    Rounding(String),
    /// An internal consistency check failed.
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
