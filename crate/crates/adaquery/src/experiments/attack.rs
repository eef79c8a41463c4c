//! `attack`: the sign-correlation attack against the naive empirical
//! mechanism and a private mechanism, paired on the same sample and the
//! same phase-one queries.
//!
//! With `private = "none"` only the naive side runs; this is the mode used
//! to calibrate the threshold.

use adaquery_core::harness::{attack_on_sample, AttackMechanism, KnownDistribution};
use rand::RngCore;

use super::{require, sq};
use crate::config::{ExperimentConfig, Kind, PrivateMechanism};
use crate::error::RunError;
use crate::output::{cell, describe, rate, Check, Outcome, Table};
use crate::runner::Runner;

pub struct Plan {
    pub universe: usize,
    pub n: usize,
    pub k: usize,
    pub threshold: f64,
    pub private: Option<AttackMechanism>,
    pub warnings: Vec<String>,
}

pub fn plan(cfg: &ExperimentConfig) -> Result<Plan, RunError> {
    let threshold = cfg.params.threshold.unwrap_or(0.010);
    require(threshold >= 0.0, "threshold", "must be >= 0")?;
    require(cfg.params.workload.is_none(), "workload", "the attack experiment always runs the attack workload")?;
    let private = cfg.params.private.unwrap_or(PrivateMechanism::Subsampled);
    let mut inner = cfg.clone();
    inner.kind = match private {
        PrivateMechanism::Scq => Kind::CountingViaScq,
        _ => Kind::SqAccuracy,
    };
    let sq = sq::plan(&inner)?;
    Ok(Plan {
        universe: sq.universe,
        n: sq.n,
        k: sq.k,
        threshold,
        private: (private != PrivateMechanism::None).then_some(sq.mechanism),
        warnings: if private == PrivateMechanism::None { Vec::new() } else { sq.warnings },
    })
}

struct Pair {
    naive: f64,
    gap: f64,
    private: Option<f64>,
}

pub fn run(cfg: &ExperimentConfig, runner: &Runner) -> Result<Outcome, RunError> {
    let plan = plan(cfg)?;
    let dist = KnownDistribution::uniform(plan.universe)?;
    let results = runner.trials(cfg.trials, cfg.seed, |_, rng| -> Result<Pair, RunError> {
        let data = dist.sample(plan.n, rng)?;
        let adversary_seed = rng.next_u64();
        let naive_seed = rng.next_u64();
        let private_seed = rng.next_u64();
        let naive = attack_on_sample(&AttackMechanism::NaiveEmpirical, &dist, &data, plan.k, adversary_seed, naive_seed)?;
        let private = match &plan.private {
            Some(m) => Some(attack_on_sample(m, &dist, &data, plan.k, adversary_seed, private_seed)?.final_error),
            None => None,
        };
        Ok(Pair {
            naive: naive.final_error,
            gap: naive.final_sample_gap,
            private,
        })
    });

    let mut outcome = Outcome::default();
    let mut table = Table::new(&[
        "trial",
        "naive_final_error",
        "naive_sample_gap",
        "private_final_error",
        "naive_exceeds_private",
        "naive_above_threshold",
        "error",
    ]);
    let mut naive = Vec::new();
    let mut private = Vec::new();
    let mut exceeds = Vec::new();
    let mut above = Vec::new();
    for (t, r) in results.into_iter().enumerate() {
        match r {
            Ok(p) => {
                let ex = p.private.map(|v| p.naive > v);
                let ab = p.naive > plan.threshold;
                table.push(vec![
                    cell(t),
                    cell(p.naive),
                    cell(p.gap),
                    p.private.map(cell).unwrap_or_default(),
                    ex.map(cell).unwrap_or_default(),
                    cell(ab),
                    String::new(),
                ]);
                naive.push(p.naive);
                private.extend(p.private);
                exceeds.extend(ex);
                above.push(ab);
            }
            Err(e) => {
                outcome.failed_trials += 1;
                exceeds.push(false);
                above.push(false);
                table.push(vec![cell(t), String::new(), String::new(), String::new(), String::new(), String::new(), e.to_string()]);
            }
        }
    }
    describe(&mut outcome, "naive_final_error", &naive);
    outcome.metric("threshold", plan.threshold);
    let above_rate = rate(above);
    outcome.metric("above_threshold_rate", above_rate);
    let min_above = cfg.assertions.min_above_threshold_rate.unwrap_or(0.9);
    outcome.checks.push(Check::at_least("above_threshold_rate", above_rate, min_above));
    if plan.private.is_some() {
        describe(&mut outcome, "private_final_error", &private);
        let separation = rate(exceeds);
        outcome.metric("separation_rate", separation);
        let min_sep = cfg.assertions.min_separation_rate.unwrap_or(0.95);
        outcome.checks.push(Check::at_least("separation_rate", separation, min_sep));
    }
    for w in &plan.warnings {
        outcome.warn(w);
    }
    outcome.table = Some(table);
    Ok(outcome)
}
