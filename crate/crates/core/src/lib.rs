#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]
#![allow(clippy::approx_constant)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod battery;
pub mod blending;
pub mod cycle;
pub mod error;
pub mod machines;
pub mod metrics;
pub mod nlp;
pub mod num;
pub mod performance;
pub mod simulate;
pub mod solver;
pub mod vehicle;

pub use error::{Error, Result};
