//! `gd-convex` and `gd-strongly-convex`: private projected gradient descent
//! on `L(S, x) = mean_s ||x - s||^2 / 2` over `[0, 1]^d`.
//!
//! The universe has two points, the corners `0` and `1` of the box, with
//! weight `mass` on `1`. The sample minimiser is the mean location, so the
//! excess loss of `x` is exactly `||x - mean||^2 / 2`.

use adaquery_core::harness::KnownDistribution;
use adaquery_core::optimize::{gd_answer, gd_answer_boosted, unit_box_quadratic, Curvature, GdConfig, GdRun, LossSpec, Scorer};
use adaquery_core::{Dataset, SessionRng, SqMechConfig, SqSession};
use rand::{RngCore, SeedableRng};

use super::{require, trial_name, unit_interval};
use crate::config::{ExperimentConfig, Kind};
use crate::error::RunError;
use crate::output::{cell, describe, rate, Check, Outcome, Table};
use crate::runner::Runner;

pub struct Plan {
    pub dim: usize,
    pub n: usize,
    pub boosted_n: usize,
    pub mass: f64,
    pub locations: Vec<Vec<f64>>,
    pub curvature: Curvature,
    pub gd: GdConfig,
    pub oracle: SqMechConfig,
    pub boosted: Option<Boosted>,
    pub warnings: Vec<String>,
}

pub struct Boosted {
    pub oracle: SqMechConfig,
    pub scorer: SqMechConfig,
}

const DIM: usize = 2;

pub fn plan(cfg: &ExperimentConfig) -> Result<Plan, RunError> {
    let p = &cfg.params;
    let alpha = p.alpha.unwrap_or(0.1);
    require(alpha > 0.0 && alpha <= 1.0, "alpha", "must lie in (0, 1]")?;
    let beta = unit_interval(p.beta.unwrap_or(0.1), "beta")?;
    let mass = p.mass.unwrap_or(0.1);
    require((0.0..=1.0).contains(&mass), "mass", "must lie in [0, 1]")?;
    let k = p.k.unwrap_or(1);
    require(k >= 1, "k", "must be >= 1")?;
    let curvature = match cfg.kind {
        Kind::GdConvex => Curvature::Convex {
            diameter: (DIM as f64).sqrt(),
        },
        Kind::GdStronglyConvex => Curvature::StronglyConvex { modulus: 1.0 },
        other => unreachable!("{other} is not a descent experiment"),
    };
    let (default_n, default_ell) = match cfg.kind {
        Kind::GdConvex => (300_000, 10),
        _ => (50_000, 1),
    };
    let n = p.n.unwrap_or(default_n);
    let ell = p.ell.unwrap_or(default_ell);
    let locations = vec![vec![0.0; DIM], vec![1.0; DIM]];
    let loss = unit_box_quadratic(&locations, curvature)?;
    let (gd, single, boosted_n, boosted, warnings) = configure(cfg, &loss, k, ell, alpha, beta, n)?;
    drop(loss);
    Ok(Plan {
        dim: DIM,
        n,
        boosted_n,
        mass,
        curvature,
        gd,
        oracle: single,
        boosted,
        locations,
        warnings,
    })
}

type Configured = (GdConfig, SqMechConfig, usize, Option<Boosted>, Vec<String>);

fn configure(cfg: &ExperimentConfig, loss: &LossSpec<'_>, k: usize, ell: usize, alpha: f64, beta: f64, n: usize) -> Result<Configured, RunError> {
    let p = &cfg.params;
    let mut gd = GdConfig::new(loss, k, ell, alpha, beta, vec![0.5; DIM]).map_err(|e| RunError::param("alpha", e))?;
    if let Some(t) = p.iterations {
        gd = gd.with_iterations(t);
    }
    gd.validate(loss).map_err(|e| RunError::param("iterations", e))?;

    let mut warnings = Vec::new();
    let single = gd.oracle_config(loss, n, false).map_err(|e| RunError::param("n", e))?;
    warnings.extend(single.warnings.iter().map(|w| format!("single run: {w}")));
    let runs = gd.boosting_runs();
    // Each boosted run sees the same per-call noise as the single run when
    // the sample grows by sqrt(runs), since the budget is split runs ways.
    let boosted_n = (n as f64 * (runs as f64).sqrt()).ceil() as usize;
    let boosted = if p.boosted.unwrap_or(false) {
        let oracle = gd.oracle_config(loss, boosted_n, true).map_err(|e| RunError::param("n", e))?;
        warnings.extend(oracle.warnings.iter().map(|w| format!("boosted run: {w}")));
        let score_ell = p.score_ell.unwrap_or(1000);
        let scorer = gd.scoring_config(boosted_n, score_ell).map_err(|e| RunError::param("score_ell", e))?;
        scorer.value.validate_for(boosted_n).map_err(|e| RunError::param("score_ell", e))?;
        Some(Boosted {
            oracle: oracle.value,
            scorer: scorer.value,
        })
    } else {
        None
    };
    Ok((gd, single.value, boosted_n, boosted, warnings))
}

/// `||x - mean location||^2 / 2`.
pub fn excess_loss(locations: &[Vec<f64>], data: &Dataset, x: &[f64]) -> f64 {
    let n = data.len() as f64;
    let mut mean = vec![0.0; x.len()];
    for &s in data.points() {
        for (m, v) in mean.iter_mut().zip(&locations[s as usize]) {
            *m += v;
        }
    }
    x.iter().zip(&mean).map(|(a, m)| (a - m / n) * (a - m / n)).sum::<f64>() / 2.0
}

struct Session {
    excess: f64,
    calls: usize,
    boosted_excess: Option<f64>,
    trace: Option<Table>,
}

fn trace_table(locations: &[Vec<f64>], data: &Dataset, runs: &[GdRun]) -> Table {
    let mut table = Table::new(&["query_id", "iteration", "coordinate", "raw_answer", "decoded", "eta", "excess_loss_estimate"]);
    let mut id = 0u64;
    for run in runs {
        for step in &run.steps {
            let x = &run.iterates[step.iteration - 1];
            table.push(vec![
                cell(id),
                cell(step.iteration),
                cell(step.coordinate),
                cell(step.raw_answer),
                cell(step.decoded),
                cell(step.eta),
                cell(excess_loss(locations, data, x)),
            ]);
            id += 1;
        }
    }
    table
}

fn session(plan: &Plan, dist: &KnownDistribution, traces: bool, rng: &mut SessionRng) -> Result<Session, RunError> {
    let loss = &unit_box_quadratic(&plan.locations, plan.curvature)?;
    let data = dist.sample(plan.n, rng)?;
    let mut oracle = SqSession::new(&data, plan.oracle.clone(), SessionRng::seed_from_u64(rng.next_u64()))?;
    let mut excess: f64 = 0.0;
    let mut runs = Vec::new();
    for _ in 0..plan.gd.k {
        let run = gd_answer(loss, &plan.gd, &mut oracle)?;
        excess = excess.max(excess_loss(&plan.locations, &data, &run.point));
        runs.push(run);
    }
    let calls = adaquery_core::QueryMechanism::transcript(&oracle).len() / plan.gd.k;
    let trace = traces.then(|| trace_table(&plan.locations, &data, &runs));

    let boosted_excess = match &plan.boosted {
        Some(b) => {
            let big = dist.sample(plan.boosted_n, rng)?;
            let mut oracle = SqSession::new(&big, b.oracle.clone(), SessionRng::seed_from_u64(rng.next_u64()))?;
            let mut scorer = SqSession::new(&big, b.scorer.clone(), SessionRng::seed_from_u64(rng.next_u64()))?;
            let mut worst: f64 = 0.0;
            for _ in 0..plan.gd.k {
                let run = gd_answer_boosted(loss, &plan.gd, &mut oracle, Scorer::Oracle(&mut scorer))?;
                worst = worst.max(excess_loss(&plan.locations, &big, &run.point));
            }
            Some(worst)
        }
        None => None,
    };
    Ok(Session {
        excess,
        calls,
        boosted_excess,
        trace,
    })
}

pub fn run(cfg: &ExperimentConfig, runner: &Runner) -> Result<Outcome, RunError> {
    let plan = plan(cfg)?;
    let dist = KnownDistribution::new(vec![1.0 - plan.mass, plan.mass])?;
    let traces = cfg.params.traces.unwrap_or(false);
    let alpha = plan.gd.alpha;
    let results = runner.trials(cfg.trials, cfg.seed, |_, rng| session(&plan, &dist, traces, rng));

    let mut outcome = Outcome::default();
    let mut table = Table::new(&["trial", "excess_loss", "failed", "oracle_calls", "iterations", "boosted_excess_loss", "boosted_failed", "error"]);
    let mut excess = Vec::new();
    let mut failed = Vec::new();
    let mut boosted = Vec::new();
    let mut boosted_failed = Vec::new();
    for (t, r) in results.into_iter().enumerate() {
        match r {
            Ok(s) => {
                let fail = s.excess > alpha;
                let bfail = s.boosted_excess.map(|b| b > alpha);
                table.push(vec![
                    cell(t),
                    cell(s.excess),
                    cell(fail),
                    cell(s.calls),
                    cell(plan.gd.iterations),
                    s.boosted_excess.map(cell).unwrap_or_default(),
                    bfail.map(cell).unwrap_or_default(),
                    String::new(),
                ]);
                excess.push(s.excess);
                failed.push(fail);
                boosted.extend(s.boosted_excess);
                boosted_failed.extend(bfail);
                if let Some(tt) = s.trace {
                    outcome.session_tables.push(("traces".into(), trial_name(t), tt));
                }
            }
            Err(e) => {
                outcome.failed_trials += 1;
                failed.push(true);
                if plan.boosted.is_some() {
                    boosted_failed.push(true);
                }
                table.push(vec![cell(t), String::new(), cell(true), String::new(), cell(plan.gd.iterations), String::new(), String::new(), e.to_string()]);
            }
        }
    }
    describe(&mut outcome, "excess_loss", &excess);
    let failure_rate = rate(failed);
    outcome.metric("failure_rate", failure_rate);
    outcome.metric("iterations", plan.gd.iterations as f64);
    outcome.metric("oracle_calls_per_query", (plan.gd.iterations * plan.dim) as f64);
    outcome.metric("noise_scale", plan.oracle.noise_scale(plan.n));
    outcome.metric("n", plan.n as f64);
    let mean = outcome.metrics["excess_loss_mean"];
    let limit = cfg.assertions.max_mean_excess.unwrap_or(alpha);
    outcome.checks.push(Check::at_most("mean_excess_loss", mean, limit));
    if plan.boosted.is_some() {
        describe(&mut outcome, "boosted_excess_loss", &boosted);
        let boosted_rate = rate(boosted_failed);
        outcome.metric("boosted_failure_rate", boosted_rate);
        outcome.metric("boosted_n", plan.boosted_n as f64);
        outcome.metric("boosting_runs", plan.gd.boosting_runs() as f64);
        let mut check = Check::below("boosted_failure_rate", boosted_rate, failure_rate);
        check.enforced = cfg.assertions.boosted_strictly_better.unwrap_or(true);
        outcome.checks.push(check);
    }
    for w in &plan.warnings {
        outcome.warn(w);
    }
    outcome.table = Some(table);
    Ok(outcome)
}
