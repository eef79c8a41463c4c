//! `scq-accuracy`: the SCQ answer distribution checked directly.
//!
//! `check = "expectation"` compares the empirical mean of many calls with
//! `(1 - f) i/n + f (n - i)/n`. `check = "privacy-ratio"` estimates
//! `Pr[1]` on an all-zero sample and on its neighbour with a single one,
//! at `n = ceil(1/(f eps))`, and compares the log-ratio with `eps`.

use adaquery_core::scq::{answer_scq, scq_config, ScqConfig};
use adaquery_core::{BudgetLedger, CountingQuery, Dataset, SessionRng};
use rand::Rng;

use super::{require, unit_interval};
use crate::config::{ExperimentConfig, ScqCheck};
use crate::error::RunError;
use crate::output::{cell, rate, Check, Outcome, Table};
use crate::runner::Runner;

pub struct Plan {
    pub check: ScqCheck,
    pub n: usize,
    pub flip_probs: Vec<f64>,
    pub calls: usize,
    pub eps: f64,
}

pub fn plan(cfg: &ExperimentConfig) -> Result<Plan, RunError> {
    let p = &cfg.params;
    let check = p.check.unwrap_or(ScqCheck::Expectation);
    let flip_probs = p.flip_probs.clone().unwrap_or_else(|| vec![0.05, 0.1, 0.25]);
    require(!flip_probs.is_empty(), "flip_probs", "must not be empty")?;
    for f in &flip_probs {
        require(*f > 0.0 && *f <= 0.5, "flip_probs", "each must lie in (0, 1/2]")?;
    }
    let eps = unit_interval(p.eps.unwrap_or(0.1), "eps")?;
    let (n, calls) = match check {
        ScqCheck::Expectation => (p.n.unwrap_or(100), p.calls.unwrap_or(100_000)),
        ScqCheck::PrivacyRatio => (0, p.calls.unwrap_or(1_000_000)),
    };
    require(check == ScqCheck::PrivacyRatio || n >= 1, "n", "must be >= 1")?;
    require(calls >= 2, "calls", "must be >= 2")?;
    Ok(Plan {
        check,
        n,
        flip_probs,
        calls,
        eps,
    })
}

fn mechanism(flip: f64, calls: usize, n: usize) -> Result<(ScqConfig, BudgetLedger), RunError> {
    let config = scq_config((2.0 * flip).min(0.5), 0.1, calls, n)?.value.with_flip_prob(flip)?;
    let ledger = BudgetLedger::new(config.target()?, calls)?;
    Ok((config, ledger))
}

/// Number of ones among `calls` SCQ answers of the identity bit on `data`.
fn ones(data: &Dataset, flip: f64, calls: usize, rng: &mut SessionRng) -> Result<u64, RunError> {
    let q = CountingQuery::new(|x| x == 1);
    let (config, mut ledger) = mechanism(flip, calls, data.len())?;
    let mut hits = 0u64;
    for _ in 0..calls {
        hits += answer_scq(data, &q, &config, &mut ledger, rng)? as u64;
    }
    Ok(hits)
}

pub fn run(cfg: &ExperimentConfig, runner: &Runner) -> Result<Outcome, RunError> {
    let plan = plan(cfg)?;
    match plan.check {
        ScqCheck::Expectation => expectation(cfg, &plan, runner),
        ScqCheck::PrivacyRatio => privacy_ratio(cfg, &plan, runner),
    }
}

fn expectation(cfg: &ExperimentConfig, plan: &Plan, runner: &Runner) -> Result<Outcome, RunError> {
    let results = runner.trials(cfg.trials, cfg.seed, |_, rng| -> Result<Vec<Vec<String>>, RunError> {
        // A random share of ones per dataset so the cases cover the range of i.
        let p: f64 = rng.gen();
        let points = (0..plan.n).map(|_| rng.gen_bool(p) as u32).collect();
        let data = Dataset::new(points, 2)?;
        let i = data.points().iter().filter(|&&x| x == 1).count();
        let mut rows = Vec::new();
        for &f in &plan.flip_probs {
            let hits = ones(&data, f, plan.calls, rng)?;
            let (config, _) = mechanism(f, plan.calls, plan.n)?;
            let expected = config.expected_answer(i, plan.n);
            let empirical = hits as f64 / plan.calls as f64;
            let se = (expected * (1.0 - expected) / plan.calls as f64).sqrt();
            let z = (empirical - expected) / se;
            rows.push(vec![cell(f), cell(plan.n), cell(i), cell(expected), cell(empirical), cell(se), cell(z), cell(z.abs() <= 3.0)]);
        }
        Ok(rows)
    });
    let mut outcome = Outcome::default();
    let mut table = Table::new(&["trial", "flip_prob", "n", "ones", "expected", "empirical", "std_err", "z", "within"]);
    let mut within = Vec::new();
    for (t, r) in results.into_iter().enumerate() {
        match r {
            Ok(rows) => {
                for row in rows {
                    within.push(row[7] == "true");
                    let mut full = vec![cell(t)];
                    full.extend(row);
                    table.push(full);
                }
            }
            Err(e) => {
                outcome.failed_trials += 1;
                outcome.warn(format!("trial {t}: {e}"));
            }
        }
    }
    let pass_rate = rate(within);
    outcome.metric("pass_rate", pass_rate);
    outcome.metric("cases", table.len() as f64);
    outcome.metric("calls", plan.calls as f64);
    let min = cfg.assertions.min_pass_rate.unwrap_or(0.95);
    outcome.checks.push(Check::at_least("pass_rate", pass_rate, min));
    outcome.table = Some(table);
    Ok(outcome)
}

fn privacy_ratio(cfg: &ExperimentConfig, plan: &Plan, runner: &Runner) -> Result<Outcome, RunError> {
    let eps = plan.eps;
    let results = runner.trials(cfg.trials, cfg.seed, |_, rng| -> Result<Vec<Vec<String>>, RunError> {
        let mut rows = Vec::new();
        for &f in &plan.flip_probs {
            let n = (1.0 / (f * eps)).ceil() as usize;
            let zeros = Dataset::new(vec![0; n], 2)?;
            let neighbour = zeros.with_replaced(0, 1)?;
            let p0 = ones(&zeros, f, plan.calls, rng)? as f64 / plan.calls as f64;
            let p1 = ones(&neighbour, f, plan.calls, rng)? as f64 / plan.calls as f64;
            let log_ratio = (p1 / p0).ln();
            // Delta method: Var[ln p] ~ (1 - p) / (N p).
            let se = ((1.0 - p0) / (plan.calls as f64 * p0) + (1.0 - p1) / (plan.calls as f64 * p1)).sqrt();
            let (config, _) = mechanism(f, plan.calls, n)?;
            let exact = config.worst_case_log_ratio(n);
            let bound = eps + 3.0 * se;
            rows.push(vec![
                cell(f),
                cell(eps),
                cell(n),
                cell(p0),
                cell(p1),
                cell(log_ratio),
                cell(se),
                cell(exact),
                cell(bound),
                cell(log_ratio <= bound),
            ]);
        }
        Ok(rows)
    });
    let mut outcome = Outcome::default();
    let mut table = Table::new(&[
        "trial",
        "flip_prob",
        "eps",
        "n",
        "p_one_all_zero",
        "p_one_neighbour",
        "log_ratio",
        "std_err",
        "exact_log_ratio",
        "bound",
        "within",
    ]);
    let mut within = Vec::new();
    let mut worst = f64::NEG_INFINITY;
    for (t, r) in results.into_iter().enumerate() {
        match r {
            Ok(rows) => {
                for row in rows {
                    within.push(row[9] == "true");
                    worst = worst.max(row[5].parse::<f64>().unwrap_or(f64::NAN) - eps);
                    let mut full = vec![cell(t)];
                    full.extend(row);
                    table.push(full);
                }
            }
            Err(e) => {
                outcome.failed_trials += 1;
                outcome.warn(format!("trial {t}: {e}"));
            }
        }
    }
    let pass_rate = rate(within);
    outcome.metric("pass_rate", pass_rate);
    outcome.metric("max_log_ratio_minus_eps", worst);
    outcome.metric("eps", eps);
    let min = cfg.assertions.min_pass_rate.unwrap_or(1.0);
    outcome.checks.push(Check::at_least("pass_rate", pass_rate, min));
    outcome.table = Some(table);
    Ok(outcome)
}
