//! Dataset building, evaluation, benchmarking and the `aoa` command line.

pub mod bench;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod evaluate;

pub use config::DatasetConfig;
pub use dataset::{build_dataset, open_dataset, DatasetManifest, Record, Split};
pub use error::{PipelineError, Result};
