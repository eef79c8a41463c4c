//! Privacy accounting: subsampling amplification and adaptive composition.
//!
//! Clipping or otherwise post-processing a released answer never changes
//! its privacy level, so no operation here accounts for it.

use crate::error::{Error, Result};

/// Target `(epsilon, delta)` for a whole session.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyParams {
    epsilon: f64,
    delta: f64,
}

impl PrivacyParams {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(Error::invalid("epsilon", "must be finite and >= 0"));
        }
        if !(0.0..1.0).contains(&delta) {
            return Err(Error::invalid("delta", "must lie in [0, 1)"));
        }
        Ok(PrivacyParams { epsilon, delta })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

fn check_counts(ell: usize, n: usize) -> Result<()> {
    if ell == 0 {
        return Err(Error::invalid("ell", "subsample size must be >= 1"));
    }
    if n == 0 {
        return Err(Error::invalid("n", "dataset size must be >= 1"));
    }
    Ok(())
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(Error::invalid("eps", "must be finite and >= 0"));
    }
    Ok(())
}

/// Privacy of an `eps`-private mechanism run on `ell` of `n` points drawn
/// without replacement: `ln(1 + (ell/n)(e^eps - 1))`.
pub fn amplify_without_replacement(eps: f64, ell: usize, n: usize) -> Result<f64> {
    check_eps(eps)?;
    check_counts(ell, n)?;
    if ell > n {
        return Err(Error::invalid("ell", "cannot draw more than n points without replacement"));
    }
    let rate = ell as f64 / n as f64;
    let amplified = if ell == n {
        eps
    } else {
        libm::log1p(rate * libm::expm1(eps))
    };
    debug_assert!(eps > 1.0 || amplified <= 2.0 * rate * eps);
    Ok(amplified)
}

/// Probability that a fixed point appears among `ell` draws with replacement
/// from `n` points: `1 - (1 - 1/n)^ell`.
pub fn inclusion_probability_with_replacement(ell: usize, n: usize) -> Result<f64> {
    check_counts(ell, n)?;
    if n == 1 {
        return Ok(1.0);
    }
    Ok(-libm::expm1(ell as f64 * libm::log1p(-1.0 / n as f64)))
}

/// Privacy of an `eps`-private mechanism run on `ell` draws with replacement
/// from `n` points: `ln(1 + (1 - (1 - 1/n)^ell)(e^eps - 1))`.
pub fn amplify_with_replacement(eps: f64, ell: usize, n: usize) -> Result<f64> {
    check_eps(eps)?;
    let hit = inclusion_probability_with_replacement(ell, n)?;
    let amplified = if hit == 1.0 {
        eps
    } else {
        libm::log1p(hit * libm::expm1(eps))
    };
    debug_assert!(eps > 1.0 || amplified <= 2.0 * (ell as f64 / n as f64) * eps);
    Ok(amplified)
}

/// Per-query epsilon so that `k` adaptive pure-epsilon queries compose to
/// `(epsilon, delta)`: `epsilon / (2 sqrt(2 k ln(1/delta)))`.
pub fn compose_per_query_epsilon(target: PrivacyParams, k: usize) -> Result<f64> {
    if !(target.epsilon > 0.0 && target.epsilon < 1.0) {
        return Err(Error::invalid("epsilon", "composition needs 0 < epsilon < 1"));
    }
    if target.delta <= 0.0 {
        return Err(Error::invalid("delta", "composition needs delta > 0"));
    }
    if k == 0 {
        return Err(Error::invalid("k", "must be >= 1"));
    }
    Ok(target.epsilon / (2.0 * libm::sqrt(2.0 * k as f64 * libm::log(1.0 / target.delta))))
}

/// Query budget for one adaptive session.
///
/// The per-query mechanisms are pure-epsilon, so the session's delta is the
/// target delta alone (no `k * delta'` term).
#[derive(Debug, Clone, PartialEq)]
pub struct BudgetLedger {
    target: PrivacyParams,
    k: usize,
    per_query_epsilon: f64,
    queries_used: usize,
}

impl BudgetLedger {
    pub fn new(target: PrivacyParams, k: usize) -> Result<Self> {
        let per_query_epsilon = compose_per_query_epsilon(target, k)?;
        Ok(BudgetLedger {
            target,
            k,
            per_query_epsilon,
            queries_used: 0,
        })
    }

    pub fn target(&self) -> PrivacyParams {
        self.target
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn per_query_epsilon(&self) -> f64 {
        self.per_query_epsilon
    }

    pub fn queries_used(&self) -> usize {
        self.queries_used
    }

    pub fn remaining(&self) -> usize {
        self.k - self.queries_used
    }

    pub fn is_exhausted(&self) -> bool {
        self.queries_used >= self.k
    }

    /// Records one query, refusing once `k` queries have been charged.
    pub fn charge(&mut self) -> Result<()> {
        if self.is_exhausted() {
            return Err(Error::BudgetExhausted {
                used: self.queries_used,
                limit: self.k,
            });
        }
        self.queries_used += 1;
        Ok(())
    }

    /// Fails without charging anything unless `count` queries remain.
    pub fn ensure_remaining(&self, count: usize) -> Result<()> {
        if self.remaining() < count {
            return Err(Error::BudgetExhausted {
                used: self.queries_used,
                limit: self.k,
            });
        }
        Ok(())
    }
}

/// Functional form of [`BudgetLedger::charge`].
pub fn ledger_charge(mut ledger: BudgetLedger) -> Result<BudgetLedger> {
    ledger.charge()?;
    Ok(ledger)
}
