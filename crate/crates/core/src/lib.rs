//! Scalar conservation laws with a Play-type hysteresis operator.
//!
//! The model couples an input `u` and a hysteresis output `w` through
//! `(u + w)_t + f(u)_x = 0` with `w` the Play operator of `u`. The crate
//! provides the Play operator, the exact Riemann solver, a monotone
//! finite-volume scheme and the discrete diagnostics that go with it.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod flux;
pub mod hysteresis;
pub mod riemann;
pub mod scenario;
pub mod scheme;

pub use error::{Error, Result};
