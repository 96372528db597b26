//! Built-in case studies.

pub mod three_tanks;
pub mod engine;
pub mod registry;

pub use registry::{Model, ModelId, ModelParams};
