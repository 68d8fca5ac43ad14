//! Construction and audit of hierarchical composite indicators.
//!
//! The pipeline runs imputation → treatment → normalization → weighting →
//! aggregation on a unit × indicator × year panel, and the [`analysis`]
//! module audits the result (correlation screening, variance-based
//! sensitivity over methodological choices, rank uncertainty bands, and
//! leave-one-out rank shifts).

// `!(x > 0.0)` style guards deliberately reject NaN along with the
// failing values, and index loops mirror the subscripted formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod aggregation;
pub mod analysis;
pub mod error;
pub mod fixture;
pub mod imputation;
pub mod io;
pub mod missing;
pub mod model;
pub mod normalization;
pub mod report;
pub mod stats;
pub mod treatment;
pub mod weighting;

pub use error::{Error, ErrorKind, Result};
