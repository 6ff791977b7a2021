//! Lehmer and Hölder means as maximum weighted likelihood estimates for the
//! minimal exponential family.

// `!(x > 0.0)` is used on purpose: unlike `x <= 0.0` it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod expfam;
pub mod families;
pub mod means;
pub mod mwle;
pub mod numeric;
pub mod pipeline;
pub mod svg;
pub mod sweep;

pub use error::{Error, Result};
