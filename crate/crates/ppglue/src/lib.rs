//! Numerical point-particle gluing for CMC vacuum initial data with a
//! cosmological constant, in the spherically symmetric sector.

// `!(x > 0.0)` guards are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod banded;
pub mod config;
pub mod error;
pub mod fit;
pub mod glue;
pub mod grid;
pub mod norms;
pub mod par;
pub mod lichnerowicz;
pub mod model;
pub mod modes;
pub mod radial;
pub mod report;
pub mod sweep;

pub use error::{Error, ErrorClass, Result};
