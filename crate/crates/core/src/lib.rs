//! Mesoscopic traffic simulation with max-pressure signal control and
//! transit priority under partial connected-vehicle observation.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod control;
pub mod error;
pub mod estimation;
pub mod harness;
pub mod network;
pub mod sim;

pub use error::{Error, Result};
