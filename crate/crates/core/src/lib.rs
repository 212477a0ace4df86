//! Stochastic quasi-Newton optimization methods with a reproducible
//! benchmark harness.
//!
//! The crate bundles five stochastic descent methods (SGD, oBFGS, oLBFGS,
//! RES, SAG) over three families of stochastic objectives (a synthetic
//! random quadratic, a squared-hinge SVM, and a class-weighted logistic
//! regression), plus:
//!
//! - dense oracles that rebuild the quasi-Newton curvature matrices
//!   explicitly, used to cross-check the limited-memory two-loop step;
//! - executable checks for the curvature-bound and convergence-rate
//!   guarantees the methods come with (trace/determinant/eigenvalue
//!   windows, per-pair curvature inequalities, an O(1/t) rate recursion);
//! - a seeded Monte-Carlo harness that measures convergence times in
//!   "stochastic functions processed" and writes CSV summaries,
//!   histograms, and traces.
//!
//! Everything is deterministic given a seed: each trial owns its own
//! [`numerics::Rng64`] and results are aggregated in trial order.

pub mod analysis;
pub mod harness;
pub mod numerics;
pub mod optimizers;
pub mod problems;
pub mod verify;
