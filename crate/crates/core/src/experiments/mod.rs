//! Experiment harness: configuration, recovery and robustness sweeps,
//! convergence studies, verification suites and report emission.

pub mod config;
pub mod convergence;
pub mod report;
pub mod suites;
pub mod sweep;

pub use config::{ConfigBuilder, ExperimentConfig, SolverChoice, WeightScheme};
pub use convergence::{format_convergence_table, run_convergence_study, ConvergenceRow};
pub use report::{
    emit_plot, emit_report, format_report, parse_report, read_report, render_plot, CellSummary,
    SweepReport, SweepRow, ThresholdRow, REPORT_HEADER,
};
pub use suites::{run_all_suites, SuiteOutcome};
pub use sweep::{
    run_recovery_sweep, run_robustness_sweep, threshold_rate, trial_seed, Harness, TrialOutcome,
    THRESHOLD_SUCCESS,
};

/// Environment variable that overrides the default output directory.
pub const OUT_DIR_ENV: &str = "QMEP_OUT_DIR";

/// Default directory for files written by the CLI.
pub const DEFAULT_OUT_DIR: &str = "qmep-out";

/// `$QMEP_OUT_DIR` if set and non-empty, else `qmep-out`.
pub fn output_dir() -> std::path::PathBuf {
    std::env::var_os(OUT_DIR_ENV)
        .filter(|v| !v.is_empty())
        .map(Into::into)
        .unwrap_or_else(|| DEFAULT_OUT_DIR.into())
}
