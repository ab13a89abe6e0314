//! Configuration, validation and staged execution of gas experiments.
//!
//! A run writes `equilibrium/`, `sample/` and `stats/` artifacts under the output directory together with a
//! `manifest.json` recording the config, the code version and the SHA-256 of every output.

// `!(x > 0.0)` deliberately rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod pipeline;
pub mod store;
pub mod validate;

pub use config::{Analysis, ExperimentConfig, Method, Record};
pub use error::CliError;
pub use pipeline::{run_pipeline, run_stages, RunManifest, Stage};
pub use validate::{validate, Finding, Severity};
