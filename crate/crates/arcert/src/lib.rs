//! # arcert
//!
//! A numerical laboratory for Gaussian maximum-likelihood identification of
//! linear auto-regressive dynamics `z_k = A z_{k-1} + w_k`, built around one
//! structural fact: the joint law of an `n`-step trajectory factors through
//! a unit-triangular operator whose inverse is banded, so exact likelihoods,
//! whitening and log-density ratios cost `O(n·d²)` rather than anything
//! dense in `n·d`.
//!
//! What lives where:
//!
//! * [`ar_model`] — the process itself: simulation, the coloring/whitening
//!   pair, exact joint log-densities, and a dense covariance assembler used
//!   only as an oracle.
//! * [`gram`] — the state-covariance recursion and the Gram-weighted
//!   parameter-error functional.
//! * [`divergence`] — exact KL and squared Hellinger between trajectory
//!   laws, a dense trace oracle, and seeded Monte-Carlo Hellinger/TV
//!   estimators.
//! * [`inference`] — finite hypothesis classes, the exact finite-class MLE,
//!   a least-squares baseline, plug-in selection entropy, seeded trial
//!   sweeps and the two bound certificates.
//! * [`config`], [`harness`], [`report`], [`cli`] — the experiment front
//!   end: config parsing, orchestration, deterministic CSV reports.
//!
//! Everything random flows through [`SeedSpec`]: experiments replay
//! bit-identically for a fixed seed, independent of worker count.

pub mod ar_model;
pub mod cli;
pub mod config;
pub mod divergence;
pub mod error;
pub mod gram;
pub mod harness;
pub mod inference;
pub mod report;
pub mod seed;

pub use ar_model::{
    color, dense_covariance, draw_noise, log_density, simulate, whiten, SystemMatrix, Trajectory,
    DENSE_SIZE_CAP,
};
pub use divergence::{
    hellinger_sq_exact, hellinger_sq_mc, kl, trace_functional, trace_functional_dense, tv_mc,
    DivergenceEstimate,
};
pub use error::{Error, Result};
pub use gram::{gram, prefix_covariance, weighted_error, GramMatrix, PrefixCovariance};
pub use inference::{
    grid_class, mle_select, ols_fit, run_trials, selection_entropy, theorem1_certificate,
    theorem2_certificate, BoundReport, HypothesisClass, Theorem2Report, TrialSummary,
};
pub use seed::SeedSpec;
