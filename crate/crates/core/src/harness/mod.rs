//! Monte Carlo harness: configuration, replication loop, CSV output and
//! command-line diagnostics.

pub mod config;
pub mod diag;
pub mod results;
pub mod run;

pub use config::{Cell, DRule, EstimatorKind, ExperimentConfig, SamplingMode};
pub use results::{read_rows, summarize, write_rows, ResultRow, Summary, CSV_MAGIC};
pub use run::{cell_draws, run_experiment, sweep, CellFailure, ExperimentOutput, RepDraw};
