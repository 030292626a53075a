//! Curvature engine for Finsler `(alpha, beta)`-metrics.
//!
//! Two independent computation paths are provided:
//!
//! * [`finsler`] differentiates any jet-evaluable `F(x, y)` directly and
//!   produces the fundamental tensor, spray, Riemann and Ricci curvature,
//!   Einstein scalar and flag curvature.
//! * [`alphabeta`] works from the Riemannian data of `alpha` and the
//!   covariant derivatives of `beta`, giving the structural spray of an
//!   `(alpha, beta)`-metric, the Randers Ricci curvature and the Ricci
//!   identities.
//!
//! [`constructions`] builds the p-power family, the two-dimensional
//! square-root family parameterized by `(u, v, B)`, and residual checkers
//! for the Einstein conditions. [`manifest`] and [`run`] drive everything
//! from JSON scenario files.

// Tensor code indexes by component; negated comparisons also reject NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod alphabeta;
pub mod constructions;
pub mod error;
pub mod expr;
pub mod finsler;
pub mod jets;
pub mod linalg;
pub mod manifest;
pub mod report;
pub mod run;
pub mod sampling;
pub mod suite;

pub use error::{Error, Result};
pub use finsler::{CurvaturePoint, FinslerMetric, TangentSample};
pub use jets::{Jet, JetContext};
