//! Sampling counting queries (SCQs).
//!
//! An SCQ is answered with a single bit: the query's value at one uniformly
//! drawn point, flipped with a small probability. The flip makes the bit
//! private; its expectation stays within the flip probability of `q(S)`.
//! Counting queries can be estimated honestly as the mean of `ell` such
//! bits, and [`naive_scq_via_count`] is the full-pass baseline.

use rand::{Rng, RngCore};

use crate::data::{CountingQuery, Dataset, ElementId, StatQuery};
use crate::error::{Checked, Error, Result, Warning};
use crate::noise::{sample_laplace, LaplaceScale};
use crate::privacy::{BudgetLedger, PrivacyParams};
use crate::sqmech::{QueryMechanism, Transcript};

#[derive(Debug, Clone, PartialEq)]
pub struct ScqConfig {
    pub alpha: f64,
    pub beta: f64,
    /// Number of SCQ calls the session may make.
    pub k: usize,
    /// Probability of releasing `1 - q(s)` instead of `q(s)`.
    pub flip_prob: f64,
    pub eps: f64,
    pub delta: f64,
}

/// Parameters for `k` SCQs at accuracy `alpha`: per-call accuracy `alpha/2`
/// (so flip probability `alpha/2`), `eps = alpha/64`, `delta = alpha*beta/16`.
///
/// Warns when `n` is below either sample-size constraint:
/// `4 sqrt(2k ln(1/delta)) / (alpha eps)` or `1024 ln(k/beta) / alpha^2`.
pub fn scq_config(alpha: f64, beta: f64, k: usize, n: usize) -> Result<Checked<ScqConfig>> {
    if !(alpha > 0.0 && alpha <= 0.5) {
        return Err(Error::invalid("alpha", "must lie in (0, 1/2]"));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::invalid("beta", "must lie in (0, 1)"));
    }
    if k == 0 {
        return Err(Error::invalid("k", "must be >= 1"));
    }
    let config = ScqConfig {
        alpha,
        beta,
        k,
        flip_prob: alpha / 2.0,
        eps: alpha / 64.0,
        delta: alpha * beta / 16.0,
    };
    let mut warnings = alloc::vec::Vec::new();
    let recommended = config.guidance_n();
    if (n as f64) < recommended {
        warnings.push(Warning::SampleSizeBelowGuidance { n, recommended });
    }
    Ok(Checked {
        value: config,
        warnings,
    })
}

impl ScqConfig {
    /// Overrides the flip probability, which must lie in `[0, 1/2]`.
    pub fn with_flip_prob(mut self, flip_prob: f64) -> Result<Self> {
        if !(0.0..=0.5).contains(&flip_prob) {
            return Err(Error::invalid("flip_prob", "must lie in [0, 1/2]"));
        }
        self.flip_prob = flip_prob;
        Ok(self)
    }

    pub fn target(&self) -> Result<PrivacyParams> {
        PrivacyParams::new(self.eps, self.delta)
    }

    pub fn guidance_n(&self) -> f64 {
        let k = self.k as f64;
        let privacy = 4.0 * libm::sqrt(2.0 * k * libm::log(1.0 / self.delta)) / (self.alpha * self.eps);
        let transfer = 1024.0 * libm::log(k / self.beta) / (self.alpha * self.alpha);
        privacy.max(transfer)
    }

    /// `E[answer] = (1 - f) i/n + f (n - i)/n` for a sample with `i` ones.
    pub fn expected_answer(&self, ones: usize, n: usize) -> f64 {
        let f = self.flip_prob;
        ((1.0 - f) * ones as f64 + f * (n - ones) as f64) / n as f64
    }

    /// Worst-case privacy loss of one call on a sample of size `n`,
    /// `ln(1 + (1 - 2f) / (f n))`, reached when the sample has no ones.
    pub fn worst_case_log_ratio(&self, n: usize) -> f64 {
        let f = self.flip_prob;
        libm::log1p((1.0 - 2.0 * f) / (f * n as f64))
    }

    /// Subsample size for counting via SCQs: `ceil(2 ln(4k/beta) / alpha^2)`
    /// for `k` counting queries.
    pub fn counting_ell(&self, counting_queries: usize) -> usize {
        crate::sqmech::high_probability_ell(self.alpha, self.beta, counting_queries)
    }
}

fn draw_bit<R: RngCore + ?Sized>(
    data: &Dataset,
    value_at: impl Fn(ElementId) -> Result<bool>,
    flip_prob: f64,
    rng: &mut R,
) -> Result<bool> {
    let s = data.get(rng.gen_range(0..data.len()));
    let bit = value_at(s)?;
    let flip = rng.gen::<f64>() < flip_prob;
    Ok(bit ^ flip)
}

/// One SCQ: the bit `q(s)` at a uniformly drawn `s`, flipped with
/// probability `cfg.flip_prob`. Evaluates `q` exactly once.
pub fn answer_scq<R: RngCore + ?Sized>(
    data: &Dataset,
    q: &CountingQuery<'_>,
    cfg: &ScqConfig,
    ledger: &mut BudgetLedger,
    rng: &mut R,
) -> Result<bool> {
    ledger.ensure_remaining(1)?;
    let bit = draw_bit(data, |s| Ok(q.eval(s)), cfg.flip_prob, rng)?;
    ledger.charge()?;
    Ok(bit)
}

/// A count of ones among `ell` SCQ answers. Its value is always a multiple
/// of `1/ell`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScqCount {
    pub ones: u64,
    pub ell: u64,
}

impl ScqCount {
    pub fn value(&self) -> f64 {
        self.ones as f64 / self.ell as f64
    }
}

/// Estimates `q(S)` as the mean of `ell` independent SCQs, all charged to
/// `ledger`. Refuses up front unless `ell` queries remain.
pub fn counting_via_scq<R: RngCore + ?Sized>(
    data: &Dataset,
    q: &CountingQuery<'_>,
    ell: usize,
    cfg: &ScqConfig,
    ledger: &mut BudgetLedger,
    rng: &mut R,
) -> Result<ScqCount> {
    if ell == 0 {
        return Err(Error::invalid("ell", "must be >= 1"));
    }
    ledger.ensure_remaining(ell)?;
    let mut ones = 0u64;
    for _ in 0..ell {
        ones += answer_scq(data, q, cfg, ledger, rng)? as u64;
    }
    Ok(ScqCount {
        ones,
        ell: ell as u64,
    })
}

/// Baseline SCQ through a noisy count: computes `q(S)` over all `n` points,
/// adds `Laplace(1/(n eps_pq))`, clamps to `[0, 1]` and returns a Bernoulli
/// draw with that probability.
pub fn naive_scq_via_count<R: RngCore + ?Sized>(
    data: &Dataset,
    q: &CountingQuery<'_>,
    eps_pq: f64,
    rng: &mut R,
) -> Result<bool> {
    if !(eps_pq > 0.0) {
        return Err(Error::invalid("eps_pq", "must be positive"));
    }
    let n = data.len();
    let ones = data.points().iter().filter(|p| q.eval(**p)).count();
    let scale = LaplaceScale::new(1.0 / (n as f64 * eps_pq))?;
    let noisy = (ones as f64 / n as f64 + sample_laplace(scale, rng)).clamp(0.0, 1.0);
    Ok(rng.gen::<f64>() < noisy)
}

/// Counting queries answered as the mean of `ell` SCQs each.
pub struct ScqSession<'d, R> {
    data: &'d Dataset,
    config: ScqConfig,
    ell: usize,
    ledger: BudgetLedger,
    rng: R,
    transcript: Transcript,
}

impl<'d, R: RngCore> ScqSession<'d, R> {
    /// The ledger allows `config.k` SCQ calls in total.
    pub fn new(data: &'d Dataset, config: ScqConfig, ell: usize, rng: R) -> Result<Self> {
        if ell == 0 {
            return Err(Error::invalid("ell", "must be >= 1"));
        }
        let ledger = BudgetLedger::new(config.target()?, config.k)?;
        Ok(ScqSession {
            data,
            config,
            ell,
            ledger,
            rng,
            transcript: Transcript::default(),
        })
    }

    pub fn ledger(&self) -> &BudgetLedger {
        &self.ledger
    }

    pub fn answer_bit(&mut self, q: &CountingQuery<'_>) -> Result<bool> {
        let bit = answer_scq(self.data, q, &self.config, &mut self.ledger, &mut self.rng)?;
        self.transcript.push(bit as u8 as f64, 1, 0);
        Ok(bit)
    }

    pub fn count(&mut self, q: &CountingQuery<'_>) -> Result<ScqCount> {
        let c = counting_via_scq(self.data, q, self.ell, &self.config, &mut self.ledger, &mut self.rng)?;
        self.transcript.push(c.value(), c.ell, 0);
        Ok(c)
    }
}

impl<R: RngCore> QueryMechanism for ScqSession<'_, R> {
    /// Answers a 0/1-valued statistical query as a count of `ell` SCQs.
    fn answer(&mut self, q: &StatQuery<'_>) -> Result<f64> {
        self.ledger.ensure_remaining(self.ell)?;
        let mut ones = 0u64;
        for _ in 0..self.ell {
            let bit = draw_bit(
                self.data,
                |s| match q.eval(s)? {
                    v if v == 1.0 => Ok(true),
                    v if v == 0.0 => Ok(false),
                    value => Err(Error::QueryOutOfRange { value }),
                },
                self.config.flip_prob,
                &mut self.rng,
            )?;
            self.ledger.charge()?;
            ones += bit as u64;
        }
        let c = ScqCount {
            ones,
            ell: self.ell as u64,
        };
        self.transcript.push(c.value(), c.ell, 0);
        Ok(c.value())
    }

    fn remaining(&self) -> usize {
        self.ledger.remaining() / self.ell
    }

    fn noise_scale(&self) -> f64 {
        0.0
    }

    fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    fn transcript_mut(&mut self) -> &mut Transcript {
        &mut self.transcript
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::SessionRng;
    use rand::SeedableRng;

    fn ledger(k: usize) -> BudgetLedger {
        BudgetLedger::new(PrivacyParams::new(0.1, 0.01).unwrap(), k).unwrap()
    }

    fn bits_config(flip: f64) -> ScqConfig {
        scq_config(0.2, 0.1, 10, 100)
            .unwrap()
            .value
            .with_flip_prob(flip)
            .unwrap()
    }

    #[test]
    fn alpha_above_half_rejected() {
        assert!(matches!(
            scq_config(0.6, 0.1, 10, 1000),
            Err(Error::InvalidParameter { name: "alpha", .. })
        ));
    }

    #[test]
    fn guidance_warnings() {
        let big = scq_config(0.2, 0.1, 100, 1_000_000).unwrap();
        assert!(!big.has_warnings());
        assert!((big.value.flip_prob - 0.1).abs() < 1e-15);
        let small = scq_config(0.2, 0.1, 100, 100).unwrap();
        assert!(small.has_warnings());
    }

    #[test]
    fn all_ones_sample_mean_answer() {
        let data = Dataset::new(vec![0; 50], 2).unwrap();
        let q = CountingQuery::new(|x| x == 0);
        let cfg = bits_config(0.1);
        let trials = 100_000;
        let mut l = ledger(trials);
        let mut rng = SessionRng::seed_from_u64(1);
        let ones = (0..trials)
            .filter(|_| answer_scq(&data, &q, &cfg, &mut l, &mut rng).unwrap())
            .count();
        let se = libm::sqrt(0.9 * 0.1 / trials as f64);
        assert!((ones as f64 / trials as f64 - 0.9).abs() <= 3.0 * se);
        assert_eq!(q.eval_count(), trials as u64);
        assert!(answer_scq(&data, &q, &cfg, &mut l, &mut rng).is_err());
    }

    #[test]
    fn expectation_formula() {
        let cfg = bits_config(0.1);
        assert!((cfg.expected_answer(30, 100) - 0.34).abs() < 1e-15);
        assert!((cfg.expected_answer(50, 100) - 0.5).abs() < 1e-15);
        let half = bits_config(0.37);
        assert!((half.expected_answer(7, 14) - 0.5).abs() < 1e-15);

        let data = Dataset::new((0..100).map(|i| (i < 30) as u32).collect(), 2).unwrap();
        let q = CountingQuery::new(|x| x == 1);
        let trials = 100_000;
        let mut l = ledger(trials);
        let mut rng = SessionRng::seed_from_u64(2);
        let ones = (0..trials)
            .filter(|_| answer_scq(&data, &q, &cfg, &mut l, &mut rng).unwrap())
            .count();
        let se = libm::sqrt(0.34 * 0.66 / trials as f64);
        assert!((ones as f64 / trials as f64 - 0.34).abs() <= 3.0 * se);
    }

    #[test]
    fn counting_via_scq_is_exact_without_flips() {
        let data = Dataset::new(vec![1; 20], 2).unwrap();
        let q = CountingQuery::new(|x| x == 1);
        let cfg = bits_config(0.0);
        let mut l = ledger(10);
        let mut rng = SessionRng::seed_from_u64(3);
        let c = counting_via_scq(&data, &q, 10, &cfg, &mut l, &mut rng).unwrap();
        assert_eq!(c.value(), 1.0);
        assert!(matches!(
            counting_via_scq(&data, &q, 10, &cfg, &mut l, &mut rng),
            Err(Error::BudgetExhausted { .. })
        ));
    }

    #[test]
    fn insufficient_budget_charges_nothing() {
        let data = Dataset::new(vec![1; 20], 2).unwrap();
        let q = CountingQuery::new(|x| x == 1);
        let cfg = bits_config(0.1);
        let mut l = ledger(9);
        let mut rng = SessionRng::seed_from_u64(4);
        assert!(counting_via_scq(&data, &q, 10, &cfg, &mut l, &mut rng).is_err());
        assert_eq!(l.queries_used(), 0);
        assert_eq!(q.eval_count(), 0);
    }

    #[test]
    fn counting_accuracy_at_half() {
        // Oracle: answer ~ Binomial(400, 0.5)/400 since E = 0.5 when i/n = 1/2.
        // Pr[|X/400 - 0.5| > 0.075] = Pr[|X - 200| > 30] ~ 2.6e-3.
        let data = Dataset::new((0..100).map(|i| (i % 2) as u32).collect(), 2).unwrap();
        let q = CountingQuery::new(|x| x == 1);
        let cfg = bits_config(0.05);
        let mut rng = SessionRng::seed_from_u64(5);
        let trials = 1000;
        let mut l = ledger(400 * trials);
        let good = (0..trials)
            .filter(|_| {
                let c = counting_via_scq(&data, &q, 400, &cfg, &mut l, &mut rng).unwrap();
                (c.value() - 0.5).abs() <= 0.075
            })
            .count();
        assert!(good as f64 >= 0.95 * trials as f64);
    }

    #[test]
    fn naive_baseline_costs_n_evaluations() {
        let data = Dataset::new(vec![1; 1000], 2).unwrap();
        let q = CountingQuery::new(|x| x == 1);
        let mut rng = SessionRng::seed_from_u64(6);
        let trials = 10_000;
        let ones = (0..trials)
            .filter(|_| naive_scq_via_count(&data, &q, 1e9, &mut rng).unwrap())
            .count();
        assert!(ones as f64 >= 0.999 * trials as f64);
        assert_eq!(q.eval_count(), 1000 * trials as u64);
        assert!(naive_scq_via_count(&data, &q, 0.0, &mut rng).is_err());
    }

    #[test]
    fn naive_baseline_symmetric_at_half() {
        let data = Dataset::new((0..1000).map(|i| (i % 2) as u32).collect(), 2).unwrap();
        let q = CountingQuery::new(|x| x == 1);
        let mut rng = SessionRng::seed_from_u64(7);
        let trials = 100_000;
        let ones = (0..trials)
            .filter(|_| naive_scq_via_count(&data, &q, 10.0, &mut rng).unwrap())
            .count();
        let se = libm::sqrt(0.25 / trials as f64);
        assert!((ones as f64 / trials as f64 - 0.5).abs() <= 3.0 * se);
    }

    #[test]
    fn session_counts_are_multiples_of_one_over_ell() {
        let data = Dataset::new((0..100).map(|i| (i % 3 == 0) as u32).collect(), 2).unwrap();
        let cfg = scq_config(0.2, 0.1, 7 * 5, 100).unwrap().value;
        let mut s = ScqSession::new(&data, cfg, 7, SessionRng::seed_from_u64(8)).unwrap();
        let q = StatQuery::new(|x| x as f64);
        for _ in 0..5 {
            let a = s.answer(&q).unwrap();
            let scaled = a * 7.0;
            assert!((scaled - libm::round(scaled)).abs() < 1e-12);
        }
        assert_eq!(s.remaining(), 0);
        assert!(s.answer(&q).is_err());
        assert_eq!(q.eval_count(), 35);
        let half = StatQuery::new(|_| 0.5);
        let mut s = ScqSession::new(&data, scq_config(0.2, 0.1, 7, 100).unwrap().value, 7, SessionRng::seed_from_u64(9)).unwrap();
        assert!(matches!(s.answer(&half), Err(Error::QueryOutOfRange { .. })));
    }
}
