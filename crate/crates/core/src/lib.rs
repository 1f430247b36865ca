//! Trajectory-based analysis of gradient descent: estimate power-law
//! gradient-inequality constants from optimization runs, evaluate the
//! convergence-rate / path-length / generalization bounds they imply, and
//! check kernel and Gram matrix spectra against their theoretical envelopes.
//!
//! The crate is organized around the pipeline
//!
//! ```text
//! data ──> objectives ──> optimize ──> lgi ──> bounds
//!                                        └───> spectra
//! ```
//!
//! * [`data`] — synthetic dataset generation, labeling, label flipping,
//!   separation distance, CSV serialization.
//! * [`objectives`] — differentiable losses with closed-form gradients
//!   (scalar power laws, product losses, linear/kernel regression,
//!   two-layer ReLU networks).
//! * [`optimize`] — full-batch GD and mini-batch SGD with per-step
//!   trajectory records and JSONL serialization.
//! * [`lgi`] — the finite-sample estimator for the constants `(theta, c)`
//!   of the inequality `‖∇L(w)‖ ≥ c (L(w) − L*)^theta` along a trajectory.
//! * [`bounds`] — convergence-rate, distance, radius, covering-number,
//!   Rademacher-complexity, and composed generalization bounds.
//! * [`spectra`] — kernel matrices, extreme eigenvalues, and spectral
//!   bound checks (RBF envelopes, linearized-kernel comparison, NTK Gram
//!   inequalities).

pub mod bounds;
pub mod data;
pub mod lgi;
pub mod objectives;
pub mod optimize;
pub mod spectra;
