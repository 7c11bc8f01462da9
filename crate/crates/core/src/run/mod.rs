//! Everything a command-line run needs, from dataset readers to the offline
//! checks that re-read a finished run directory.

pub mod config;
pub mod ingest;
pub mod pipeline;
pub mod records;
pub mod report;
pub mod verify;

pub use config::{parse_baselines, Overrides, RunConfig};
pub use ingest::{load_dataset, DatasetFormat, Ingested};
pub use pipeline::{run_pipeline, RunOptions, RunStats, RunSummary};
pub use verify::{verify_run, VerifyReport};
