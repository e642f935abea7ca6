//! Learning a whole parameter-to-price map `θ -> E_θ[X]` from one joint
//! sample `{(Θ_i, X_i)}` by minimizing the empirical ridge-regularized
//! quadratic `V_{N,λ}(h) = (1/N) Σ (h(Θ_i) - X_i)^2 + λ ||h||^2`.
//!
//! The crate provides the samplers ([`models`], [`sampling`]), the kernels
//! and feature maps ([`kernels`]), three minimizers ([`estimators`]),
//! numerical checks of the supporting operator inequalities
//! ([`theory_checks`]) and a config-driven experiment runner ([`harness`]).

// `!(x >= 0.0)` style checks are how NaN gets rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimators;
pub mod harness;
pub mod kernels;
pub mod models;
pub mod numerics;
pub mod points;
pub mod sampling;
pub mod theory_checks;

pub use error::{Error, Result};
pub use numerics::RngStream;
pub use points::PointSet;

#[cfg(test)]
#[track_caller]
pub(crate) fn assert_close(a: f64, b: f64, tol: f64) {
    assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
}
