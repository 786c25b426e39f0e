//! Experiment driver: configuration, Monte Carlo trials, statistical
//! summaries, and deterministic CSV/summary export.

mod config;
mod driver;
mod export;

pub use config::{DesignFamilyName, DesignSpec, ExperimentConfig, Mode, RoundsSpec, SourceSpec, StateInit};
pub use driver::{export_outcomes_csv, run_experiment, run_single_trial, scaling_sweep, ExperimentSummary, SweepRow, SweepTable, TrialRecord};
pub use export::{export, read_records_csv, write_records_csv, write_summary, CSV_HEADER};
