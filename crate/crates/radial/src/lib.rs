//! Positive radial solutions of
//!
//! ```text
//! Δu + K(|x|) u^p + μ f(|x|) = 0   in ℝᴺ,
//! ```
//!
//! in the supercritical range. The crate computes regular (shooting) solutions,
//! the singular solution `u*` with `u*(r) ~ γ r^{-θ}` at the origin, intersection
//! numbers between the two, the far-field fast/slow decay classification and
//! μ-scans built on top of them.
//!
//! Radial problems are integrated in `t = ln r`. Regular solutions use the state
//! `(u, r u_r)`, the singular solution uses the Emden–Fowler variable
//! `w(t) = e^{θt} u(e^t)`.

// `!(x > 0.0)` guards deliberately reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod exponents;
pub mod farfield;
pub mod integrator;
pub mod intersection;
pub mod muscan;
pub mod profiles;
pub mod quadrature;
pub mod shooting;
pub mod singular;

pub use error::{Error, Result};
pub use exponents::{
    build_exponent_table, joseph_lundgren_exponent, sobolev_exponent, validate_regime, Exponent, ExponentTable,
    RegimeReport,
};
pub use profiles::{CoefficientProfile, ForcingProfile, ProblemSpec};
pub use shooting::{RadialSolution, SolverOptions, Termination};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
