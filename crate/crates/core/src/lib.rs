#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod error;
pub mod harness;
pub mod cho_model;
pub mod liouville;
pub mod lyapunov;
pub mod metric3;
pub mod multilinear;

pub use error::{Error, Result};
