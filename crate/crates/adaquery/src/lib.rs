//! Experiment runner for `adaquery-core`.
//!
//! An experiment is described by a TOML file (see [`config::ExperimentConfig`]).
//! Running it writes `<output>.csv` with one row per trial, optional
//! per-session tables under `<output>.<group>/`, and `<output>.summary.json`
//! with metrics and the configured checks.

pub mod clock;
pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod runner;

pub use config::ExperimentConfig;
pub use error::RunError;
pub use output::Outcome;
pub use runner::Runner;

use output::{paths, session_path, write_summary, Summary};

/// Runs `cfg`, writes its artifacts and returns the outcome; the run passed
/// when [`Outcome::passed`] holds.
pub fn run(cfg: &ExperimentConfig, jobs: Option<usize>) -> Result<Outcome, RunError> {
    let runner = Runner::new(jobs)?;
    let outcome = experiments::execute(cfg, &runner)?;
    let provenance = cfg.to_toml();
    let out = paths(&cfg.output);
    if let Some(table) = &outcome.table {
        table.write(&out.csv, &provenance)?;
    }
    for (group, name, table) in &outcome.session_tables {
        table.write(&session_path(&cfg.output, group, name), &provenance)?;
    }
    let summary = Summary {
        schema_version: output::SCHEMA_VERSION,
        kind: cfg.kind.to_string(),
        seed: cfg.seed,
        trials: cfg.trials,
        failed_trials: outcome.failed_trials,
        passed: outcome.passed(),
        metrics: &outcome.metrics,
        assertions: &outcome.checks,
        warnings: &outcome.warnings,
    };
    write_summary(&out.summary, &summary)?;
    Ok(outcome)
}

/// Parses and checks `cfg` without running it; returns the warnings.
pub fn validate(cfg: &ExperimentConfig) -> Result<Vec<String>, RunError> {
    experiments::validate(cfg)
}
