//! `amplification-table`: amplified epsilon for each `(eps, ell/n)` pair,
//! with and without replacement, next to the `2 (ell/n) eps` bound.

use adaquery_core::privacy::{amplify_with_replacement, amplify_without_replacement};

use super::require;
use crate::config::ExperimentConfig;
use crate::error::RunError;
use crate::output::{cell, Check, Outcome, Table};

pub struct Plan {
    pub eps_values: Vec<f64>,
    pub rates: Vec<f64>,
    pub n: usize,
}

pub fn plan(cfg: &ExperimentConfig) -> Result<Plan, RunError> {
    let p = &cfg.params;
    let eps_values = p.eps_values.clone().unwrap_or_else(|| vec![0.1, 0.5, 1.0]);
    let rates = p.rates.clone().unwrap_or_else(|| vec![0.001, 0.01, 0.1]);
    let n = p.n.unwrap_or(100_000);
    require(!eps_values.is_empty() && eps_values.iter().all(|e| *e > 0.0 && e.is_finite()), "eps_values", "must be positive")?;
    require(!rates.is_empty() && rates.iter().all(|r| *r > 0.0 && *r <= 1.0), "rates", "each must lie in (0, 1]")?;
    for r in &rates {
        require((r * n as f64).round() >= 1.0, "rates", "rate * n must round to at least 1")?;
    }
    Ok(Plan { eps_values, rates, n })
}

pub fn run(cfg: &ExperimentConfig) -> Result<Outcome, RunError> {
    let plan = plan(cfg)?;
    let mut table = Table::new(&["eps", "rate", "ell", "n", "without_replacement", "with_replacement", "bound", "within_bound"]);
    let mut violations = 0usize;
    let mut bounded = 0usize;
    for &eps in &plan.eps_values {
        for &r in &plan.rates {
            let ell = (r * plan.n as f64).round() as usize;
            let without = amplify_without_replacement(eps, ell, plan.n)?;
            let with = amplify_with_replacement(eps, ell, plan.n)?;
            let rate = ell as f64 / plan.n as f64;
            let bound = 2.0 * rate * eps;
            // The bound is only claimed for eps <= 1.
            let within = eps > 1.0 || (without <= bound && with <= bound);
            if eps <= 1.0 {
                bounded += 1;
                violations += !within as usize;
            }
            table.push(vec![cell(eps), cell(rate), cell(ell), cell(plan.n), cell(without), cell(with), cell(bound), cell(within)]);
        }
    }
    let mut outcome = Outcome::default();
    outcome.metric("rows", table.len() as f64);
    outcome.metric("rows_with_bound", bounded as f64);
    outcome.metric("bound_violations", violations as f64);
    outcome.checks.push(Check::at_most("bound_violations", violations as f64, 0.0));
    outcome.table = Some(table);
    Ok(outcome)
}
