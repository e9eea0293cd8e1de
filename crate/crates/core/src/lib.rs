//! Generation-aware forecasting of gross returns for product lines with rolling releases.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adjust;
pub mod analysis;
pub mod config;
pub mod domain;
pub mod error;
pub mod ewa;
pub mod ingest;
pub mod models;
pub mod pipeline;
pub mod prep;
pub mod preprocess;
pub mod report;
pub mod stats;
pub mod store;
pub mod synth;

pub use error::{Error, Result};
