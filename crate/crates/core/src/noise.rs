//! Randomness primitives: Laplace draws and exponential-mechanism selection.
//!
//! Every sampler takes the caller's RNG explicitly so that a session seeded
//! once replays the same draw sequence.

use alloc::vec::Vec;
use rand::{Rng, RngCore};

use crate::error::{Error, Result};

/// Scale `b` of a zero-mean Laplace distribution, `b > 0`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct LaplaceScale(f64);

impl LaplaceScale {
    pub fn new(b: f64) -> Result<Self> {
        if !(b > 0.0) || !b.is_finite() {
            return Err(Error::invalid("scale", "Laplace scale must be positive and finite"));
        }
        Ok(LaplaceScale(b))
    }

    pub fn get(self) -> f64 {
        self.0
    }

    /// Variance `2 b^2`.
    pub fn variance(self) -> f64 {
        2.0 * self.0 * self.0
    }

    /// `Pr[|X| >= t] = exp(-t / b)` for `t >= 0`.
    pub fn tail(self, t: f64) -> f64 {
        libm::exp(-t.max(0.0) / self.0)
    }
}

/// Uniform draw on the open interval (0, 1).
pub(crate) fn open_unit<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Draws from Laplace(0, b) by inverting the CDF at an open-interval uniform.
pub fn sample_laplace<R: RngCore + ?Sized>(scale: LaplaceScale, rng: &mut R) -> f64 {
    let b = scale.0;
    let u = open_unit(rng);
    if u < 0.5 {
        b * libm::log(2.0 * u)
    } else {
        -b * libm::log(2.0 * (1.0 - u))
    }
}

/// Validating form of [`sample_laplace`] for raw scale values.
pub fn laplace<R: RngCore + ?Sized>(b: f64, rng: &mut R) -> Result<f64> {
    Ok(sample_laplace(LaplaceScale::new(b)?, rng))
}

/// Candidates with utilities for the exponential mechanism.
///
/// Selection probability of item `r` is `exp(eta * u(r)) / sum_r' exp(eta * u(r'))`.
/// Callers releasing a sensitivity-`1/n` utility set `eta = eps * n / 2`.
#[derive(Debug, Clone)]
pub struct ScoredChoice<T> {
    items: Vec<(T, f64)>,
    eta: f64,
}

impl<T> ScoredChoice<T> {
    pub fn new(items: Vec<(T, f64)>, eta: f64) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::invalid("items", "exponential mechanism needs at least one item"));
        }
        if items.iter().any(|(_, u)| !u.is_finite()) {
            return Err(Error::invalid("items", "utilities must be finite"));
        }
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(Error::invalid("eta", "must be positive and finite"));
        }
        Ok(ScoredChoice { items, eta })
    }

    pub fn items(&self) -> &[(T, f64)] {
        &self.items
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn max_utility(&self) -> f64 {
        self.items
            .iter()
            .map(|(_, u)| *u)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Exact selection probabilities, in item order.
    pub fn probabilities(&self) -> Vec<f64> {
        let weights = self.shifted_weights();
        let total: f64 = weights.iter().sum();
        weights.into_iter().map(|w| w / total).collect()
    }

    // Shifting by the max keeps every exponent <= 0; the shift cancels on normalisation.
    fn shifted_weights(&self) -> Vec<f64> {
        let top = self.max_utility();
        self.items
            .iter()
            .map(|(_, u)| libm::exp(self.eta * (u - top)))
            .collect()
    }

    /// Index of the selected item.
    pub fn select_index<R: RngCore + ?Sized>(&self, rng: &mut R) -> usize {
        let weights = self.shifted_weights();
        let total: f64 = weights.iter().sum();
        let mut target = rng.gen::<f64>() * total;
        for (i, w) in weights.iter().enumerate() {
            if target < *w {
                return i;
            }
            target -= w;
        }
        // Rounding can leave a sliver past the last bucket.
        weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
    }
}

/// Selects one id with probability proportional to `exp(eta * utility)`.
pub fn exp_mechanism_select<'a, T, R: RngCore + ?Sized>(
    choices: &'a ScoredChoice<T>,
    rng: &mut R,
) -> &'a T {
    &choices.items[choices.select_index(rng)].0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::SessionRng;
    use rand::SeedableRng;

    fn within_std_errs(observed: f64, p: f64, trials: usize, k: f64) -> bool {
        let se = libm::sqrt(p * (1.0 - p) / trials as f64);
        libm::fabs(observed - p) <= k * se
    }

    #[test]
    fn laplace_tail_matches_closed_form() {
        let mut rng = SessionRng::seed_from_u64(7);
        let scale = LaplaceScale::new(1.0).unwrap();
        let draws: Vec<f64> = (0..1_000_000).map(|_| sample_laplace(scale, &mut rng)).collect();
        for t in [0.5, 1.0, 2.0] {
            let frac = draws.iter().filter(|x| libm::fabs(**x) > t).count() as f64 / draws.len() as f64;
            assert!(within_std_errs(frac, libm::exp(-t), draws.len(), 3.0), "t={t} frac={frac}");
        }
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        assert!(libm::fabs(mean) <= 3.0 * libm::sqrt(2.0) / 1e3, "mean {mean}");
    }

    #[test]
    fn non_positive_scale_rejected() {
        assert!(LaplaceScale::new(0.0).is_err());
        assert!(LaplaceScale::new(-1.0).is_err());
        assert!(LaplaceScale::new(f64::NAN).is_err());
        let mut rng = SessionRng::seed_from_u64(0);
        assert!(matches!(laplace(0.0, &mut rng), Err(Error::InvalidParameter { .. })));
    }

    #[test]
    fn same_seed_same_draws() {
        let scale = LaplaceScale::new(0.3).unwrap();
        let mut a = SessionRng::seed_from_u64(99);
        let mut b = SessionRng::seed_from_u64(99);
        for _ in 0..1000 {
            assert_eq!(
                sample_laplace(scale, &mut a).to_bits(),
                sample_laplace(scale, &mut b).to_bits()
            );
        }
    }

    #[test]
    fn equal_utilities_select_uniformly() {
        let mut rng = SessionRng::seed_from_u64(3);
        let choice = ScoredChoice::new(vec![("a", 0.7), ("b", 0.7)], 123.0).unwrap();
        let trials = 100_000;
        let hits = (0..trials)
            .filter(|_| *exp_mechanism_select(&choice, &mut rng) == "a")
            .count();
        assert!(within_std_errs(hits as f64 / trials as f64, 0.5, trials, 3.0));
    }

    #[test]
    fn two_item_softmax_probability() {
        let mut rng = SessionRng::seed_from_u64(4);
        let choice = ScoredChoice::new(vec![(0u8, 1.0), (1u8, 0.0)], 2.0).unwrap();
        let e2 = libm::exp(2.0);
        let p = e2 / (e2 + 1.0);
        assert!(libm::fabs(p - 0.880_797) < 1e-6);
        assert!(libm::fabs(choice.probabilities()[0] - p) < 1e-15);
        let trials = 100_000;
        let hits = (0..trials)
            .filter(|_| *exp_mechanism_select(&choice, &mut rng) == 0)
            .count();
        assert!(within_std_errs(hits as f64 / trials as f64, p, trials, 3.0));
    }

    #[test]
    fn expected_utility_bound_on_random_instance() {
        let mut rng = SessionRng::seed_from_u64(5);
        let items: Vec<(usize, f64)> = (0..10).map(|i| (i, rng.gen::<f64>())).collect();
        let eta = 4.0;
        let choice = ScoredChoice::new(items.clone(), eta).unwrap();
        let trials = 100_000;
        let total: f64 = (0..trials)
            .map(|_| items[*exp_mechanism_select(&choice, &mut rng)].1)
            .sum();
        let bound = choice.max_utility() - libm::log(10.0) / eta;
        assert!(total / trials as f64 >= bound);
    }

    #[test]
    fn huge_eta_does_not_overflow() {
        let mut rng = SessionRng::seed_from_u64(6);
        let choice = ScoredChoice::new(vec![(0, 1000.0), (1, 999.0)], 1e6).unwrap();
        assert_eq!(*exp_mechanism_select(&choice, &mut rng), 0);
        assert!(choice.probabilities().iter().all(|p| p.is_finite()));
    }

    #[test]
    fn bad_choices_rejected() {
        assert!(ScoredChoice::<u8>::new(vec![], 1.0).is_err());
        assert!(ScoredChoice::new(vec![(0, f64::INFINITY)], 1.0).is_err());
        assert!(ScoredChoice::new(vec![(0, f64::NAN)], 1.0).is_err());
        assert!(ScoredChoice::new(vec![(0, 1.0)], 0.0).is_err());
    }
}
