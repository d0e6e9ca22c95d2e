//! Block-sparse compressed sensing: block-length dependent recovery
//! thresholds, an l2/l1 recovery solver, and Monte Carlo phase-transition
//! experiments.
//!
//! A signal of length `d*n` is split into `n` blocks of length `d`; at most
//! `k` blocks are nonzero. Given `d*m` Gaussian measurements `y = A x`, the
//! l2/l1 program minimizes the sum of per-block Euclidean norms subject to
//! `A x = y`. This crate computes, for each block length `d`, the strong,
//! sectional, and weak recovery thresholds (the largest certifiable sparsity
//! fraction `beta = k/n` for a given undersampling fraction `alpha = m/n`),
//! solves the recovery program on concrete instances, and confronts the
//! theoretical curves with simulation.
//!
//! Modules:
//! - [`special`]: regularized incomplete gamma, its inverse, chi quantiles
//!   and truncated chi moments that all threshold formulas are built from.
//! - [`threshold`]: the implicit theta equations, threshold inequalities,
//!   their large-`d` closed forms, the escape-probability bound, and the
//!   finite-`n` slack term.
//! - [`solver`]: the l2/l1 program solved by operator splitting.
//! - [`oracle`]: brute-force null-space condition checks on tiny instances.
//! - [`harness`]: instance generation, (m, k) sweeps, and theory comparison.
//!
//! The `parallel` feature (default) runs Monte Carlo trials and oracle grid
//! sweeps on a rayon pool; without it everything runs sequentially with
//! identical results.

pub mod error;
pub mod harness;
pub mod oracle;
pub mod solver;
pub mod special;
pub mod threshold;

pub use error::{Error, Result};
pub use solver::{BlockDims, BlockSignal, ProblemInstance, SolverConfig};
pub use threshold::ThresholdKind;
