//! `bench-timing`: per-query cost of the subsampled mechanism against the
//! full-pass empirical answer as `n` grows.
//!
//! The CSV holds only the samples-examined counts, which are deterministic.
//! Wall-clock medians and their growth ratios go to the summary.

use adaquery_core::harness::{interact, KnownDistribution, NaiveMechanism, RandomQueries};
use adaquery_core::{QueryMechanism, SessionRng, SqMechConfig, SqSession};
use rand::{RngCore, SeedableRng};

use super::require;
use crate::clock::monotonic_ns;
use crate::config::ExperimentConfig;
use crate::error::RunError;
use crate::output::{cell, quantile, Check, Outcome, Table};
use crate::runner::trial_rng;

pub struct Plan {
    pub ns: Vec<usize>,
    pub ell: usize,
    pub queries: usize,
    pub universe: usize,
    pub config: SqMechConfig,
}

pub fn plan(cfg: &ExperimentConfig) -> Result<Plan, RunError> {
    let p = &cfg.params;
    let ns = p.ns.clone().unwrap_or_else(|| vec![10_000, 100_000, 1_000_000]);
    require(ns.len() >= 2, "ns", "needs at least two sample sizes")?;
    require(ns.windows(2).all(|w| w[0] < w[1]), "ns", "must be strictly increasing")?;
    let ell = p.ell.unwrap_or(1000);
    require(ell >= 1 && ell <= ns[0], "ell", "must lie in [1, smallest n]")?;
    let queries = p.queries.unwrap_or(200);
    require(queries >= 1, "queries", "must be >= 1")?;
    let universe = p.universe.unwrap_or(512);
    require(universe >= 2, "universe", "must be >= 2")?;
    let config = SqMechConfig::custom(ell, p.eps.unwrap_or(0.5), 1e-6, queries).map_err(|e| RunError::param("ell", e))?;
    Ok(Plan {
        ns,
        ell,
        queries,
        universe,
        config,
    })
}

fn median_ns(m: &dyn QueryMechanism) -> f64 {
    let mut v: Vec<f64> = m.transcript().records().iter().map(|r| r.elapsed_ns as f64).collect();
    v.sort_by(f64::total_cmp);
    quantile(&v, 0.5)
}

fn samples(m: &dyn QueryMechanism) -> (u64, u64) {
    let r = m.transcript().records();
    let lo = r.iter().map(|r| r.samples_examined).min().unwrap_or(0);
    let hi = r.iter().map(|r| r.samples_examined).max().unwrap_or(0);
    (lo, hi)
}

/// Runs sequentially: timings taken while other trials compete for the
/// cores would mean little.
pub fn run(cfg: &ExperimentConfig) -> Result<Outcome, RunError> {
    let plan = plan(cfg)?;
    let dist = KnownDistribution::uniform(plan.universe)?;
    let mut outcome = Outcome::default();
    let mut table = Table::new(&["n", "mechanism", "queries", "min_samples_examined", "max_samples_examined", "expected", "exact"]);
    let mut all_exact = true;
    let mut medians: Vec<(usize, f64, f64)> = Vec::new();
    for (i, &n) in plan.ns.iter().enumerate() {
        let mut rng = trial_rng(cfg.seed, i);
        let data = dist.sample(n, &mut rng)?;
        let mut alg = Vec::new();
        let mut naive = Vec::new();
        for _ in 0..cfg.trials {
            let query_seed = rng.next_u64();
            let mut private = SqSession::new(&data, plan.config.clone(), SessionRng::seed_from_u64(rng.next_u64()))?.with_clock(monotonic_ns);
            interact(&mut private, &mut RandomQueries::new(plan.universe, plan.queries, SessionRng::seed_from_u64(query_seed)))?;
            let mut full = NaiveMechanism::new(&data).with_clock(monotonic_ns);
            interact(&mut full, &mut RandomQueries::new(plan.universe, plan.queries, SessionRng::seed_from_u64(query_seed)))?;
            alg.push(median_ns(&private));
            naive.push(median_ns(&full));
            if alg.len() == 1 {
                for (name, m, expected) in [("subsampled", &private as &dyn QueryMechanism, plan.ell), ("naive", &full as &dyn QueryMechanism, n)] {
                    let (lo, hi) = samples(m);
                    let exact = lo == expected as u64 && hi == expected as u64;
                    all_exact &= exact;
                    table.push(vec![cell(n), cell(name), cell(plan.queries), cell(lo), cell(hi), cell(expected), cell(exact)]);
                }
            }
        }
        alg.sort_by(f64::total_cmp);
        naive.sort_by(f64::total_cmp);
        let (a, b) = (quantile(&alg, 0.5), quantile(&naive, 0.5));
        outcome.metric(&format!("subsampled_median_ns_n{n}"), a);
        outcome.metric(&format!("naive_median_ns_n{n}"), b);
        medians.push((n, a, b));
    }
    let (first, last) = (medians[0], medians[medians.len() - 1]);
    let private_growth = last.1 / first.1;
    let naive_growth = last.2 / first.2;
    outcome.metric("subsampled_growth", private_growth);
    outcome.metric("naive_growth", naive_growth);
    outcome.metric("n_ratio", last.0 as f64 / first.0 as f64);
    outcome.checks.push(Check::at_least("samples_examined_exact", all_exact as u8 as f64, 1.0));
    let max_private = cfg.assertions.max_private_growth.unwrap_or(2.0);
    let min_naive = cfg.assertions.min_naive_growth.unwrap_or(50.0);
    outcome.checks.push(Check::at_most("subsampled_growth", private_growth, max_private));
    outcome.checks.push(Check::at_least("naive_growth", naive_growth, min_naive));
    outcome.table = Some(table);
    Ok(outcome)
}
