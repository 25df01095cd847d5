//! Estimation of the column-sum functional of a column-sparse Gaussian mean
//! matrix, and robust estimation of a common Gaussian mean under arbitrary
//! column outliers.
//!
//! The crate is organized around the observation model `Y = Θ + σΞ` (and its
//! robust variant `Y = μ1ᵀ + Θ + σΞ`), where at most `s` of the `n` columns
//! of `Θ` are nonzero:
//!
//! * [`model`] — dense column-major matrices, sparsity patterns, the linear
//!   functional `L(M) = M·1` and column centering.
//! * [`functional`] — estimators of `L(Θ)`: naive, oracle, greedy subset
//!   selection (plain and adaptive), group hard/soft thresholding and
//!   element-wise hard thresholding, each with its prescribed tuning rule.
//! * [`robust`] — estimators of the common mean `μ`: sample mean,
//!   coordinate-wise median, the group-lasso profile-likelihood estimator and
//!   the iterative soft thresholding pipeline.
//! * [`bounds`] — analytic tail/norm bound evaluators and independent
//!   brute-force oracles used to validate the estimators.
//! * [`harness`] — seeded instance generation and Monte Carlo risk
//!   measurement with bit-reproducible output.
//! * [`report`] — CSV/JSON serialization of instances and risk tables.

pub mod bounds;
pub mod functional;
pub mod harness;
pub mod model;
pub mod report;
pub mod robust;

pub use model::{CoreError, EstimateResult, Flag, Matrix, NoiseModel, SparsityPattern};
