//! Channel-pruning scorers built on per-layer rank normalization.
//!
//! The crate covers the whole scorer pipeline:
//!
//! - [`profile`]: per-channel magnitude and Taylor scores, validated.
//! - [`ranknorm`]: per-layer rank min-max normalization and budget allocation.
//! - [`features`]: positive rank-space feature columns (logistic-map orbit
//!   statistics, sinusoid and Weierstrass banks, monotone splines, bumps)
//!   plus Spearman and isotonic diagnostics.
//! - [`fusion`]: multiplicative exponent fusion and per-layer Top-K selection.
//! - [`dbo`]: the Dung Beetle Optimizer used to search fusion exponents.
//! - [`oracle`]: accuracy oracles, a deterministic surrogate and a
//!   newline-delimited JSON client for external evaluators.
//! - [`analysis`]: plateau statistics, escape deltas, regime verdicts and
//!   rank-Chebyshev complexity.
//! - [`search`]: fusion-exponent search against an oracle's proxy split.
//! - [`variants`]: the named scorer battery and its complexity classes.
//! - [`adaptive`]: probe-then-prune regime selection.
//! - [`experiment`]: resumable grid runner and report emission.
//!
//! The `rankprune` binary is a thin wrapper over [`cli`].
//!
//! Runnable examples live under `examples/`, one per capability.

pub mod adaptive;
pub mod analysis;
pub mod cli;
pub mod dbo;
pub mod experiment;
pub mod features;
pub mod fusion;
pub mod oracle;
pub mod profile;
pub mod ranknorm;
pub mod search;
pub mod variants;

pub use profile::{LayerProfile, ModelProfile, ProfileError, Seed, Selection, Sparsity};
