//! Discrete-time simulation of programs running in probabilistic environments,
//! with Monte-Carlo estimation of the Wasserstein-based evolution metric and
//! of robustness, adaptability and reliability bounds built on it.

// `!(x > 0.0)` style checks are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dataspace;
pub mod engine;
pub mod environment;
pub mod error;
pub mod metric;
pub mod models;
pub mod process;
pub mod robustness;
pub mod stats;

pub use error::{Error, Result};
