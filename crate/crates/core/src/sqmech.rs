//! Fast subsampled Laplace mechanism for adaptive statistical queries.
//!
//! Each query is answered from `ell` points drawn from the sample, plus
//! Laplace noise of scale `1 / (ell * eps')` with
//! `eps' = eps * n / (4 * ell * sqrt(2 k ln(1/delta)))`. The number of
//! points examined per query is `ell`, whatever the size of the sample.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use rand::{Rng, RngCore};

use crate::data::{Dataset, ElementId, StatQuery};
use crate::error::{Checked, Error, Result, Warning};
use crate::noise::{sample_laplace, LaplaceScale};
use crate::privacy::{BudgetLedger, PrivacyParams};

/// How the `ell` points of a subsample are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampling {
    WithReplacement,
    WithoutReplacement,
}

/// Which accuracy guarantee the parameters are chosen for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccuracyMode {
    /// `(alpha, beta)`-accuracy over all `k` answers; `ell` is derived.
    HighProbability,
    /// Per-answer expected error; the caller picks `ell`.
    InExpectation { ell: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SqMechConfig {
    pub alpha: f64,
    pub beta: f64,
    pub k: usize,
    pub ell: usize,
    pub eps: f64,
    pub delta: f64,
    pub sampling: Sampling,
    pub clip_output: bool,
}

/// `ceil(2 ln(4k/beta) / alpha^2)`, the subsample size for which the
/// Hoeffding error of every one of `k` subsample means stays below
/// `alpha/2` except with probability `beta/2`.
pub fn high_probability_ell(alpha: f64, beta: f64, k: usize) -> usize {
    libm::ceil(2.0 * libm::log(4.0 * k as f64 / beta) / (alpha * alpha)) as usize
}

fn check_accuracy(alpha: f64, beta: f64, k: usize) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid("alpha", "must lie in (0, 1]"));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::invalid("beta", "must lie in (0, 1)"));
    }
    if k == 0 {
        return Err(Error::invalid("k", "must be >= 1"));
    }
    Ok(())
}

/// Chooses `(ell, eps, delta)` for a target accuracy.
///
/// High-probability mode uses `ell = ceil(2 ln(4k/beta)/alpha^2)`,
/// `eps = alpha/64`, `delta = alpha*beta/32`; in-expectation mode uses
/// `eps = alpha/8`, `delta = alpha/4` with the caller's `ell`. A warning is
/// attached when `n < 4 sqrt(2k ln(1/delta)) ln(2k/beta) / (alpha eps)`.
pub fn config_from_accuracy(
    alpha: f64,
    beta: f64,
    k: usize,
    n: usize,
    mode: AccuracyMode,
    sampling: Sampling,
) -> Result<Checked<SqMechConfig>> {
    check_accuracy(alpha, beta, k)?;
    if n == 0 {
        return Err(Error::invalid("n", "must be >= 1"));
    }
    let (ell, eps, delta) = match mode {
        AccuracyMode::HighProbability => (
            high_probability_ell(alpha, beta, k),
            alpha / 64.0,
            alpha * beta / 32.0,
        ),
        AccuracyMode::InExpectation { ell } => (ell, alpha / 8.0, alpha / 4.0),
    };
    let config = SqMechConfig {
        alpha,
        beta,
        k,
        ell,
        eps,
        delta,
        sampling,
        clip_output: false,
    };
    config.validate_for(n)?;
    let mut warnings = Vec::new();
    let recommended = config.guidance_n();
    if (n as f64) < recommended {
        warnings.push(Warning::SampleSizeBelowGuidance { n, recommended });
    }
    Ok(Checked {
        value: config,
        warnings,
    })
}

impl SqMechConfig {
    /// Direct parameterisation, bypassing the accuracy-driven choice.
    /// `alpha` and `beta` are only used by [`SqMechConfig::guidance_n`].
    pub fn custom(ell: usize, eps: f64, delta: f64, k: usize) -> Result<Self> {
        let config = SqMechConfig {
            alpha: 1.0,
            beta: 0.5,
            k,
            ell,
            eps,
            delta,
            sampling: Sampling::WithoutReplacement,
            clip_output: false,
        };
        config.target()?;
        if ell == 0 {
            return Err(Error::invalid("ell", "must be >= 1"));
        }
        Ok(config)
    }

    pub fn with_sampling(mut self, sampling: Sampling) -> Self {
        self.sampling = sampling;
        self
    }

    pub fn with_clip(mut self, clip_output: bool) -> Self {
        self.clip_output = clip_output;
        self
    }

    pub fn target(&self) -> Result<PrivacyParams> {
        PrivacyParams::new(self.eps, self.delta)
    }

    /// Checks the parameters against a sample of size `n`.
    pub fn validate_for(&self, n: usize) -> Result<()> {
        if self.ell == 0 {
            return Err(Error::invalid("ell", "must be >= 1"));
        }
        if self.sampling == Sampling::WithoutReplacement && self.ell > n {
            return Err(Error::invalid("ell", "exceeds n for sampling without replacement"));
        }
        // Composition needs 0 < eps < 1 and delta > 0.
        BudgetLedger::new(self.target()?, self.k).map(|_| ())
    }

    fn composition_root(&self) -> f64 {
        libm::sqrt(2.0 * self.k as f64 * libm::log(1.0 / self.delta))
    }

    /// `eps' = eps * n / (4 * ell * sqrt(2 k ln(1/delta)))`.
    pub fn per_query_epsilon(&self, n: usize) -> f64 {
        self.eps * n as f64 / (4.0 * self.ell as f64 * self.composition_root())
    }

    /// Privacy of one subsampled query, `2 (ell/n) eps'`; equals the
    /// composition budget `eps / (2 sqrt(2k ln(1/delta)))`.
    pub fn amplified_query_epsilon(&self, n: usize) -> f64 {
        2.0 * (self.ell as f64 / n as f64) * self.per_query_epsilon(n)
    }

    /// Laplace scale `1 / (ell * eps')`.
    pub fn noise_scale(&self, n: usize) -> f64 {
        1.0 / (self.ell as f64 * self.per_query_epsilon(n))
    }

    /// The two error terms of the in-expectation analysis: noise
    /// `1/(eps' ell)` and subsampling `1/sqrt(ell)`.
    pub fn expectation_terms(&self, n: usize) -> (f64, f64) {
        (self.noise_scale(n), 1.0 / libm::sqrt(self.ell as f64))
    }

    /// `4 sqrt(2k ln(1/delta)) ln(2k/beta) / (alpha eps)`.
    pub fn guidance_n(&self) -> f64 {
        4.0 * self.composition_root() * libm::log(2.0 * self.k as f64 / self.beta)
            / (self.alpha * self.eps)
    }
}

/// Draws `ell` point indices into `out`.
///
/// Without replacement this is a partial Fisher-Yates shuffle over a
/// virtual index array; only displaced slots are stored, so the cost is
/// `O(ell log ell)` and independent of `n`.
fn draw_indices<R: RngCore + ?Sized>(
    n: usize,
    ell: usize,
    sampling: Sampling,
    rng: &mut R,
    out: &mut Vec<usize>,
) -> Result<()> {
    if ell == 0 {
        return Err(Error::invalid("ell", "must be >= 1"));
    }
    out.clear();
    match sampling {
        Sampling::WithReplacement => {
            out.extend((0..ell).map(|_| rng.gen_range(0..n)));
        }
        Sampling::WithoutReplacement => {
            if ell > n {
                return Err(Error::invalid("ell", "exceeds n for sampling without replacement"));
            }
            let mut displaced: BTreeMap<usize, usize> = BTreeMap::new();
            for i in 0..ell {
                let j = rng.gen_range(i..n);
                let at_i = *displaced.get(&i).unwrap_or(&i);
                let at_j = *displaced.get(&j).unwrap_or(&j);
                out.push(at_j);
                displaced.insert(j, at_i);
            }
        }
    }
    Ok(())
}

/// Uniform subsample of `ell` points: i.i.d. with replacement, or a uniform
/// `ell`-subset (in random order) without.
pub fn subsample<R: RngCore + ?Sized>(
    data: &Dataset,
    ell: usize,
    sampling: Sampling,
    rng: &mut R,
) -> Result<Dataset> {
    let mut idx = Vec::with_capacity(ell);
    draw_indices(data.len(), ell, sampling, rng, &mut idx)?;
    let points: Vec<ElementId> = idx.into_iter().map(|i| data.get(i)).collect();
    Dataset::new(points, data.universe_size())
}

/// One answered query.
#[derive(Debug, Clone, PartialEq)]
pub struct TranscriptRecord {
    pub query_id: u64,
    pub answer: f64,
    pub samples_examined: u64,
    pub elapsed_ns: u64,
}

/// Ordered record of a session's answers.
#[derive(Debug, Clone, PartialEq)]
pub struct Transcript {
    records: Vec<TranscriptRecord>,
    valid: bool,
}

impl Default for Transcript {
    fn default() -> Self {
        Transcript {
            records: Vec::new(),
            valid: true,
        }
    }
}

impl Transcript {
    pub fn records(&self) -> &[TranscriptRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// False once a run that used this session was aborted part way.
    pub fn is_valid(&self) -> bool {
        self.valid
    }

    pub fn invalidate(&mut self) {
        self.valid = false;
    }

    pub fn push(&mut self, answer: f64, samples_examined: u64, elapsed_ns: u64) -> u64 {
        let query_id = self.records.len() as u64;
        self.records.push(TranscriptRecord {
            query_id,
            answer,
            samples_examined,
            elapsed_ns,
        });
        query_id
    }

    pub fn total_samples_examined(&self) -> u64 {
        self.records.iter().map(|r| r.samples_examined).sum()
    }
}

/// Monotonic nanosecond clock used to time answers; `None` records zero.
pub type Clock = fn() -> u64;

/// Anything that answers statistical queries one at a time.
pub trait QueryMechanism {
    fn answer(&mut self, q: &StatQuery<'_>) -> Result<f64>;

    /// Queries still allowed in this session.
    fn remaining(&self) -> usize;

    /// Scale of the additive noise on each answer (0 for exact mechanisms).
    fn noise_scale(&self) -> f64;

    fn transcript(&self) -> &Transcript;

    fn transcript_mut(&mut self) -> &mut Transcript;
}

/// Answers one query against `data` under `cfg`, charging `ledger`.
pub fn answer_query<R: RngCore + ?Sized>(
    data: &Dataset,
    q: &StatQuery<'_>,
    cfg: &SqMechConfig,
    ledger: &mut BudgetLedger,
    rng: &mut R,
) -> Result<f64> {
    let mut scratch = Vec::with_capacity(cfg.ell);
    answer_with_scratch(data, q, cfg, ledger, rng, &mut scratch)
}

fn answer_with_scratch<R: RngCore + ?Sized>(
    data: &Dataset,
    q: &StatQuery<'_>,
    cfg: &SqMechConfig,
    ledger: &mut BudgetLedger,
    rng: &mut R,
    scratch: &mut Vec<usize>,
) -> Result<f64> {
    ledger.ensure_remaining(1)?;
    draw_indices(data.len(), cfg.ell, cfg.sampling, rng, scratch)?;
    let mut sum = 0.0;
    for &i in scratch.iter() {
        sum += q.eval(data.get(i))?;
    }
    let mean = sum / cfg.ell as f64;
    let scale = LaplaceScale::new(cfg.noise_scale(data.len()))?;
    let mut answer = mean + sample_laplace(scale, rng);
    if cfg.clip_output {
        answer = answer.clamp(0.0, 1.0);
    }
    ledger.charge()?;
    Ok(answer)
}

/// A sequential session of the subsampled Laplace mechanism over one sample.
pub struct SqSession<'d, R> {
    data: &'d Dataset,
    config: SqMechConfig,
    ledger: BudgetLedger,
    rng: R,
    transcript: Transcript,
    clock: Option<Clock>,
    scratch: Vec<usize>,
}

impl<'d, R: RngCore> SqSession<'d, R> {
    pub fn new(data: &'d Dataset, config: SqMechConfig, rng: R) -> Result<Self> {
        config.validate_for(data.len())?;
        let ledger = BudgetLedger::new(config.target()?, config.k)?;
        Ok(SqSession {
            data,
            scratch: Vec::with_capacity(config.ell),
            config,
            ledger,
            rng,
            transcript: Transcript::default(),
            clock: None,
        })
    }

    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = Some(clock);
        self
    }

    pub fn config(&self) -> &SqMechConfig {
        &self.config
    }

    pub fn ledger(&self) -> &BudgetLedger {
        &self.ledger
    }

    pub fn data(&self) -> &Dataset {
        self.data
    }

    pub fn rng_mut(&mut self) -> &mut R {
        &mut self.rng
    }

    /// Per-query epsilon used for the noise, from the session-level target.
    pub fn per_query_epsilon(&self) -> f64 {
        self.config.per_query_epsilon(self.data.len())
    }
}

impl<R: RngCore> QueryMechanism for SqSession<'_, R> {
    fn answer(&mut self, q: &StatQuery<'_>) -> Result<f64> {
        let start = self.clock.map_or(0, |c| c());
        let answer = answer_with_scratch(
            self.data,
            q,
            &self.config,
            &mut self.ledger,
            &mut self.rng,
            &mut self.scratch,
        )?;
        let elapsed = self.clock.map_or(0, |c| c().saturating_sub(start));
        self.transcript
            .push(answer, self.config.ell as u64, elapsed);
        Ok(answer)
    }

    fn remaining(&self) -> usize {
        self.ledger.remaining()
    }

    fn noise_scale(&self) -> f64 {
        self.config.noise_scale(self.data.len())
    }

    fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    fn transcript_mut(&mut self) -> &mut Transcript {
        &mut self.transcript
    }
}
