//! Numerical laboratory for Grushin-Laplace operators on truncated boxes.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod besov;
pub mod error;
pub mod functions;
pub mod grid;
pub mod metric;
pub mod operator;
pub mod perimeter;
pub mod quadrature;
pub mod semigroup;
pub mod sobolev;

pub use error::{Error, Result};
