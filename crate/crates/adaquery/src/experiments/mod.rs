//! One module per experiment kind.

use adaquery_core::harness::{exact_query_mean, interact, AttackMechanism, KnownDistribution, RandomQueries};
use adaquery_core::sqmech::Transcript;
use adaquery_core::{CountingQuery, Dataset, SessionRng};
use rand::{RngCore, SeedableRng};

use crate::config::{ExperimentConfig, Kind, Workload};
use crate::error::RunError;
use crate::output::{cell, Check, Outcome, Table};
use crate::runner::Runner;

pub mod amplification;
pub mod attack;
pub mod bench;
pub mod gd;
pub mod scq;
pub mod sq;

/// Checks the configuration without running anything.
pub fn validate(cfg: &ExperimentConfig) -> Result<Vec<String>, RunError> {
    match cfg.kind {
        Kind::SqAccuracy | Kind::CountingViaScq => sq::plan(cfg).map(|p| p.warnings),
        Kind::ScqAccuracy => scq::plan(cfg).map(|_| Vec::new()),
        Kind::Attack => attack::plan(cfg).map(|p| p.warnings),
        Kind::GdConvex | Kind::GdStronglyConvex => gd::plan(cfg).map(|p| p.warnings),
        Kind::BenchTiming => bench::plan(cfg).map(|_| Vec::new()),
        Kind::AmplificationTable => amplification::plan(cfg).map(|_| Vec::new()),
    }
}

pub fn execute(cfg: &ExperimentConfig, runner: &Runner) -> Result<Outcome, RunError> {
    let mut outcome = match cfg.kind {
        Kind::SqAccuracy | Kind::CountingViaScq => sq::run(cfg, runner)?,
        Kind::ScqAccuracy => scq::run(cfg, runner)?,
        Kind::Attack => attack::run(cfg, runner)?,
        Kind::GdConvex | Kind::GdStronglyConvex => gd::run(cfg, runner)?,
        Kind::BenchTiming => bench::run(cfg)?,
        Kind::AmplificationTable => amplification::run(cfg)?,
    };
    if cfg.assertions.disabled == Some(true) {
        outcome.checks.iter_mut().for_each(|c| c.enforced = false);
    }
    Ok(outcome)
}

pub(crate) fn require(cond: bool, field: &str, reason: &str) -> Result<(), RunError> {
    if cond {
        Ok(())
    } else {
        Err(RunError::field(format!("params.{field}"), reason))
    }
}

pub(crate) fn unit_interval(v: f64, field: &str) -> Result<f64, RunError> {
    require(v > 0.0 && v < 1.0, field, "must lie in (0, 1)")?;
    Ok(v)
}

/// Errors of one session under a counting-query workload.
pub(crate) struct SessionErrors {
    pub errors: Vec<f64>,
    pub answers: Vec<f64>,
    pub transcript: Transcript,
}

impl SessionErrors {
    pub fn max_error(&self) -> f64 {
        self.errors.iter().fold(0.0, |a, b| a.max(*b))
    }

    pub fn final_error(&self) -> f64 {
        self.errors.last().copied().unwrap_or(f64::NAN)
    }
}

pub(crate) fn run_workload(
    mechanism: &AttackMechanism,
    workload: Workload,
    dist: &KnownDistribution,
    data: &Dataset,
    k: usize,
    rng: &mut SessionRng,
) -> Result<SessionErrors, RunError> {
    let adversary_seed = rng.next_u64();
    let session_seed = rng.next_u64();
    match workload {
        Workload::Attack => {
            let out = adaquery_core::harness::attack_on_sample(mechanism, dist, data, k, adversary_seed, session_seed)?;
            Ok(SessionErrors {
                answers: out.state.answers().to_vec(),
                errors: out.errors,
                transcript: out.transcript,
            })
        }
        Workload::Random => {
            let mut session = mechanism.session(data, SessionRng::seed_from_u64(session_seed))?;
            let mut adversary = RandomQueries::new(dist.universe_size(), k, SessionRng::seed_from_u64(adversary_seed));
            let state = interact(session.as_mut(), &mut adversary)?;
            let errors = state
                .queries()
                .iter()
                .zip(state.answers())
                .map(|(t, a)| {
                    let q = CountingQuery::from_bits(t.clone());
                    (a - exact_query_mean(dist, q.as_stat())).abs()
                })
                .collect();
            Ok(SessionErrors {
                answers: state.answers().to_vec(),
                errors,
                transcript: session.transcript().clone(),
            })
        }
    }
}

pub(crate) fn transcript_table(t: &Transcript) -> Table {
    let mut table = Table::new(&["query_id", "answer", "samples_examined", "elapsed_ns"]);
    for r in t.records() {
        table.push(vec![cell(r.query_id), cell(r.answer), cell(r.samples_examined), cell(r.elapsed_ns)]);
    }
    table
}

pub(crate) fn trial_name(t: usize) -> String {
    format!("trial-{t:05}")
}

pub(crate) fn failure_check(outcome: &mut Outcome, cfg: &ExperimentConfig, failure_rate: f64, beta: f64) {
    let limit = cfg.assertions.max_failure_rate.unwrap_or(beta);
    outcome.checks.push(Check::at_most("failure_rate", failure_rate, limit));
}
