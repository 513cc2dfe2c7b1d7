//! Initial value problems for differential systems with running maxima,
//!
//! ```text
//! x'(t) = f(t, x(t), max_{s in [0,t]} h_1(x(s)), ..., max_{s in [0,t]} h_k(x(s))),   x(0) = x0,
//! ```
//!
//! with contraction-based existence horizons, Picard iteration (general and
//! for three special systems with explicit error bounds), direct Euler/Heun
//! stepping, closed-form oracles and an integral-form residual check.

// `!(v > 0.0)` style checks are used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod catalog;
pub mod expr;
pub mod horizon;
pub mod integrate;
pub mod picard;
pub mod problem;
pub mod trajectory;
pub mod verify;

pub use expr::{parse, print, Expr};
pub use problem::{ProblemError, ProblemSpec};
pub use trajectory::{Grid, Trajectory};
