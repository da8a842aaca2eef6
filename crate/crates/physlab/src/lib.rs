//! Experiment harness: named, seeded presets that turn the numerical core
//! into CSV and JSON artifacts with a digest manifest.

pub mod config;
mod error;
pub mod output;
pub mod presets;

pub use error::{HarnessError, Result};
