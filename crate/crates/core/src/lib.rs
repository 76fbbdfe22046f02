// Index loops read closer to the linear algebra, and `!(x > 0.0)` is how
// NaN gets rejected along with the out-of-range values.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod grid;
pub mod numerics;
pub mod powerflow;
pub mod dispatch;
pub mod demand;
pub mod failure;
pub mod mria;
pub mod analysis;
pub mod config;
pub mod pipeline;
pub mod seed;
pub mod synthetic;
mod parallel;
mod textio;

pub use error::{Error, Result};
