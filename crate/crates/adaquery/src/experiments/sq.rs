//! `sq-accuracy` and `counting-via-scq`: worst error over adaptive sessions
//! against a uniform distribution whose query means are known exactly.

use adaquery_core::harness::{AttackMechanism, KnownDistribution};
use adaquery_core::scq::scq_config;
use adaquery_core::sqmech::{config_from_accuracy, high_probability_ell};
use adaquery_core::{AccuracyMode, Sampling};

use super::{failure_check, require, run_workload, transcript_table, trial_name, unit_interval};
use crate::config::{ExperimentConfig, Kind, SamplingName, Workload};
use crate::error::RunError;
use crate::output::{cell, describe, rate, Check, Outcome, Table};
use crate::runner::Runner;

pub struct Plan {
    pub universe: usize,
    pub n: usize,
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub ell: usize,
    pub workload: Workload,
    pub mechanism: AttackMechanism,
    pub noise_scale: f64,
    pub warnings: Vec<String>,
}

pub fn plan(cfg: &ExperimentConfig) -> Result<Plan, RunError> {
    let p = &cfg.params;
    let universe = p.universe.unwrap_or(512);
    let n = p.n.unwrap_or(20_000);
    let k = p.k.unwrap_or(50);
    let alpha = p.alpha.unwrap_or(0.2);
    let beta = unit_interval(p.beta.unwrap_or(0.1), "beta")?;
    require(universe >= 2, "universe", "must be >= 2")?;
    require(k >= 2 || p.workload == Some(Workload::Random), "k", "the attack workload needs k >= 2")?;
    require(alpha > 0.0 && alpha <= 1.0, "alpha", "must lie in (0, 1]")?;
    let workload = p.workload.unwrap_or(Workload::Attack);
    let sampling = match p.sampling.unwrap_or(SamplingName::Without) {
        SamplingName::With => Sampling::WithReplacement,
        SamplingName::Without => Sampling::WithoutReplacement,
    };
    let mut warnings = Vec::new();
    let (mechanism, ell, noise_scale) = match cfg.kind {
        Kind::SqAccuracy => {
            let checked = config_from_accuracy(alpha, beta, k, n, AccuracyMode::HighProbability, sampling)
                .map_err(|e| RunError::param("alpha", e))?;
            warnings.extend(checked.warnings.iter().map(|w| w.to_string()));
            let mut sq = checked.value.with_clip(p.clip.unwrap_or(false));
            if let Some(ell) = p.ell {
                sq.ell = ell;
            }
            sq.validate_for(n).map_err(|e| RunError::param("ell", e))?;
            let scale = sq.noise_scale(n);
            (AttackMechanism::Subsampled(sq.clone()), sq.ell, scale)
        }
        Kind::CountingViaScq => {
            require(alpha <= 1.0, "alpha", "must lie in (0, 1]")?;
            let ell = p.ell.unwrap_or_else(|| high_probability_ell(alpha, beta, k));
            require(ell >= 1, "ell", "must be >= 1")?;
            // Each count averages ell one-bit answers from an SCQ mechanism
            // run at accuracy alpha/2 and confidence beta/2 over k*ell calls.
            let checked = scq_config(alpha / 2.0, beta / 2.0, k * ell, n).map_err(|e| RunError::param("alpha", e))?;
            warnings.extend(checked.warnings.iter().map(|w| w.to_string()));
            (AttackMechanism::Scq { config: checked.value, ell }, ell, 0.0)
        }
        other => unreachable!("{other} is not a query-accuracy experiment"),
    };
    Ok(Plan {
        universe,
        n,
        k,
        alpha,
        beta,
        ell,
        workload,
        mechanism,
        noise_scale,
        warnings,
    })
}

struct TrialResult {
    max_error: f64,
    final_error: f64,
    samples: u64,
    honest: bool,
    transcript: Option<Table>,
}

pub fn run(cfg: &ExperimentConfig, runner: &Runner) -> Result<Outcome, RunError> {
    let plan = plan(cfg)?;
    let dist = KnownDistribution::uniform(plan.universe)?;
    let keep_transcripts = cfg.params.transcripts.unwrap_or(false);
    let results = runner.trials(cfg.trials, cfg.seed, |_, rng| -> Result<TrialResult, String> {
        let data = dist.sample(plan.n, rng).map_err(|e| e.to_string())?;
        let s = run_workload(&plan.mechanism, plan.workload, &dist, &data, plan.k, rng).map_err(|e| e.to_string())?;
        let honest = s.answers.iter().all(|a| {
            let scaled = a * plan.ell as f64;
            (scaled - scaled.round()).abs() < 1e-9
        });
        Ok(TrialResult {
            max_error: s.max_error(),
            final_error: s.final_error(),
            samples: s.transcript.total_samples_examined(),
            honest,
            transcript: keep_transcripts.then(|| transcript_table(&s.transcript)),
        })
    });

    let mut outcome = Outcome::default();
    let mut table = Table::new(&["trial", "max_error", "final_error", "failed", "samples_examined", "honest", "error"]);
    let mut max_errors = Vec::new();
    let mut final_errors = Vec::new();
    let mut failed = Vec::new();
    let mut honest = Vec::new();
    for (t, r) in results.into_iter().enumerate() {
        match r {
            Ok(r) => {
                let fail = r.max_error > plan.alpha;
                table.push(vec![cell(t), cell(r.max_error), cell(r.final_error), cell(fail), cell(r.samples), cell(r.honest), String::new()]);
                max_errors.push(r.max_error);
                final_errors.push(r.final_error);
                failed.push(fail);
                honest.push(r.honest);
                if let Some(tt) = r.transcript {
                    outcome.session_tables.push(("transcripts".into(), trial_name(t), tt));
                }
            }
            Err(e) => {
                outcome.failed_trials += 1;
                failed.push(true);
                table.push(vec![cell(t), String::new(), String::new(), cell(true), String::new(), String::new(), e]);
            }
        }
    }
    let failure_rate = rate(failed);
    outcome.metric("failure_rate", failure_rate);
    outcome.metric("alpha", plan.alpha);
    outcome.metric("beta", plan.beta);
    outcome.metric("ell", plan.ell as f64);
    outcome.metric("n", plan.n as f64);
    outcome.metric("k", plan.k as f64);
    describe(&mut outcome, "max_error", &max_errors);
    describe(&mut outcome, "final_error", &final_errors);
    failure_check(&mut outcome, cfg, failure_rate, plan.beta);
    match cfg.kind {
        Kind::SqAccuracy => outcome.metric("noise_scale", plan.noise_scale),
        _ => {
            let honest_rate = rate(honest);
            outcome.metric("honest_rate", honest_rate);
            outcome.checks.push(Check::at_least("honest_rate", honest_rate, 1.0));
        }
    }
    for w in &plan.warnings {
        outcome.warn(w);
    }
    outcome.table = Some(table);
    Ok(outcome)
}
