#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod conv1d;
pub mod error;
pub mod grid;
pub mod harness;
mod linalg;
pub mod quadrature;
pub mod reaction;
pub mod resolvent;
pub mod splitting;

pub use error::{MoltError, Result};
