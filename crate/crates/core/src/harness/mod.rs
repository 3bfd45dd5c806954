//! Experiment driver: configuration, training and evaluation runs, and
//! cross-run comparison.

mod compare;
mod config;
mod run;
mod svg;

pub use compare::{compare, summarize, window_len, RunRecord, SummaryRow, SUMMARY_FILE, SUMMARY_HEADER};
pub use config::{ExperimentConfig, KEYS};
pub use run::{
    build_env, read_checkpoint, read_metrics, run_eval, run_train, write_checkpoint, write_trajectory,
    MetricsRow, MetricsWriter, TrainReport, CHECKPOINT_FILE, ECHO_FILE, METRICS_FILE, METRICS_HEADER,
    TRAJECTORY_FILE,
};
pub use svg::{Chart, Series};

use crate::error::Error;

/// Process exit code for a failed command.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::InvalidSpec(_) => 2,
        Error::NonFinite(_) => 3,
        _ => 1,
    }
}
