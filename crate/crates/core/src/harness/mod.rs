//! The seeded experiment protocol: split, log, learn, evaluate, aggregate.

mod config;
mod report;
mod run;

use thiserror::Error;

pub use config::{DataSource, DemoKind, DrRewardFit, EstimatorKind, ExperimentConfig, LearnerKind, OpeLogs};
pub use report::{
    aggregate, aggregate_rows, boxplot, emit_report, flatten, quantile, raw_csv, read_raw_csv, render_report,
    AggregateReport, BoxplotStats, CellSummary, DemoTable,
};
pub use run::{
    run_single, run_suite, train_policy, Cell, DemoRun, Experiment, LearnerRun, RawRow, RunResult, DEMO_POLICY,
    ORACLE_METRIC,
};

use crate::baselines::PolicyError;
use crate::data_model::DataError;
use crate::opl::OplError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Data(#[from] DataError),

    #[error(transparent)]
    Policy(#[from] PolicyError),

    #[error(transparent)]
    Learn(#[from] OplError),

    #[error("no results to aggregate")]
    NoResults,

    #[error("every seed failed")]
    AllSeedsFailed,

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    /// Short machine-readable kind for error summaries.
    pub fn kind(&self) -> &'static str {
        match self {
            HarnessError::Config(_) => "config",
            HarnessError::Data(_) => "data",
            HarnessError::Policy(_) => "policy",
            HarnessError::Learn(_) => "learn",
            HarnessError::NoResults => "no_results",
            HarnessError::AllSeedsFailed => "all_seeds_failed",
            HarnessError::Csv(_) => "csv",
            HarnessError::Io(_) => "io",
        }
    }
}
