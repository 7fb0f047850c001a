//! Configuration, metrics, run directories, ablation grids and the CLI.

pub mod ablation;
pub mod cli;
pub mod config;
pub mod metrics;
pub mod run;

pub use ablation::{
    mean_std, run_grid, summarize, summary_csv, AblationGrid, Axis, SummaryRow, DEFAULT_SEEDS,
};
pub use config::{resolve_output, RunConfig, OUTPUT_ROOT_ENV};
pub use metrics::{final_score, read_metrics, MetricsRecord, RecordKind};
pub use run::{completed_score, is_complete, load_policy, run_or_resume, run_training, RunOutcome};
