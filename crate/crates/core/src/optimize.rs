//! Projected gradient descent on a private statistical-query gradient oracle.
//!
//! Each iteration asks the oracle for the `d` gradient coordinates as `d`
//! separate statistical queries, so one optimisation query costs exactly
//! `T * d` oracle calls. Per-point gradient coordinates live in a bounded
//! range `[lo, hi]`; they are affinely mapped into `[0, 1]` before being
//! asked and mapped back afterwards, so noise in decoded units is the
//! oracle's noise times `hi - lo`.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use crate::data::{Dataset, ElementId, StatQuery};
use crate::error::{Checked, Error, Result, Warning};
use crate::sqmech::{
    config_from_accuracy, AccuracyMode, QueryMechanism, Sampling, SqMechConfig, Transcript,
};

/// Affine code between a bounded range `[lo, hi]` and `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueRange {
    pub lo: f64,
    pub hi: f64,
}

impl ValueRange {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::invalid("range", "need finite lo < hi"));
        }
        Ok(ValueRange { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn encode(&self, v: f64) -> f64 {
        (v - self.lo) / self.width()
    }

    pub fn decode(&self, u: f64) -> f64 {
        self.lo + u * self.width()
    }
}

/// Which step schedule drives the descent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Curvature {
    /// Convex loss over a domain with `||x - y|| <= diameter`; `eta_t = D / (G sqrt t)`.
    Convex { diameter: f64 },
    /// `H`-strongly convex loss; `eta_t = 2 / (H t)`.
    StronglyConvex { modulus: f64 },
}

impl Curvature {
    pub fn step_size(&self, gradient_bound: f64, t: usize) -> f64 {
        let t = t as f64;
        match *self {
            Curvature::Convex { diameter } => diameter / (gradient_bound * libm::sqrt(t)),
            Curvature::StronglyConvex { modulus } => 2.0 / (modulus * t),
        }
    }
}

type PointGradient<'a> = Box<dyn Fn(ElementId, &[f64], usize) -> f64 + 'a>;
type PointLoss<'a> = Box<dyn Fn(ElementId, &[f64]) -> f64 + 'a>;
type Projection<'a> = Box<dyn Fn(&mut [f64]) + 'a>;

/// A loss `L(S, x) = mean_s loss(s, x)` whose gradient coordinates are
/// statistical queries.
pub struct LossSpec<'a> {
    dim: usize,
    gradient: PointGradient<'a>,
    ranges: Vec<ValueRange>,
    gradient_bound: f64,
    curvature: Curvature,
    project: Projection<'a>,
    point_loss: Option<(PointLoss<'a>, ValueRange)>,
}

impl<'a> LossSpec<'a> {
    /// `gradient(s, x, i)` is coordinate `i` of the per-point gradient and
    /// must lie in `ranges[i]`; `project` maps any point onto the domain.
    pub fn new(
        ranges: Vec<ValueRange>,
        gradient: impl Fn(ElementId, &[f64], usize) -> f64 + 'a,
        gradient_bound: f64,
        curvature: Curvature,
        project: impl Fn(&mut [f64]) + 'a,
    ) -> Result<Self> {
        if ranges.is_empty() {
            return Err(Error::invalid("ranges", "dimension must be >= 1"));
        }
        if !(gradient_bound > 0.0) {
            return Err(Error::invalid("gradient_bound", "must be positive"));
        }
        match curvature {
            Curvature::Convex { diameter } if !(diameter > 0.0) => {
                return Err(Error::invalid("diameter", "must be positive"))
            }
            Curvature::StronglyConvex { modulus } if !(modulus > 0.0) => {
                return Err(Error::invalid("modulus", "must be positive"))
            }
            _ => {}
        }
        Ok(LossSpec {
            dim: ranges.len(),
            gradient: Box::new(gradient),
            ranges,
            gradient_bound,
            curvature,
            project: Box::new(project),
            point_loss: None,
        })
    }

    /// Declares the per-point loss, bounded in `range`, so that candidate
    /// points can be scored with one statistical query each.
    pub fn with_point_loss(
        mut self,
        range: ValueRange,
        loss: impl Fn(ElementId, &[f64]) -> f64 + 'a,
    ) -> Self {
        self.point_loss = Some((Box::new(loss), range));
        self
    }

    pub fn with_curvature(mut self, curvature: Curvature) -> Self {
        self.curvature = curvature;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn gradient_bound(&self) -> f64 {
        self.gradient_bound
    }

    pub fn curvature(&self) -> Curvature {
        self.curvature
    }

    pub fn range(&self, coordinate: usize) -> ValueRange {
        self.ranges[coordinate]
    }

    pub fn project(&self, x: &mut [f64]) {
        (self.project)(x)
    }

    /// Oracle noise scale expressed in gradient units for one coordinate.
    pub fn decoded_noise_scale(&self, oracle_scale: f64, coordinate: usize) -> f64 {
        oracle_scale * self.ranges[coordinate].width()
    }

    /// Exact `L(S, x)`; needs a declared point loss.
    pub fn exact_loss(&self, data: &Dataset, x: &[f64]) -> Option<f64> {
        let (loss, _) = self.point_loss.as_ref()?;
        let sum: f64 = data.points().iter().map(|s| loss(*s, x)).sum();
        Some(sum / data.len() as f64)
    }

    /// Exact `grad L(S, x)`.
    pub fn exact_gradient(&self, data: &Dataset, x: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|i| {
                let sum: f64 = data.points().iter().map(|s| (self.gradient)(*s, x, i)).sum();
                sum / data.len() as f64
            })
            .collect()
    }

    fn coordinate_query<'q>(&'q self, x: &'q [f64], i: usize) -> StatQuery<'q> {
        let range = self.ranges[i];
        StatQuery::new(move |s| range.encode((self.gradient)(s, x, i)))
    }

    fn loss_query<'q>(&'q self, x: &'q [f64]) -> Option<(StatQuery<'q>, ValueRange)> {
        let (loss, range) = self.point_loss.as_ref()?;
        let range = *range;
        Some((StatQuery::new(move |s| range.encode(loss(s, x))), range))
    }
}

/// `L(S, x) = mean_s ||x - s||^2 / 2` over the unit box `[0, 1]^d`, with
/// universe element `e` located at `locations[e]`.
///
/// Per-point gradient coordinates `x_i - s_i` lie in `[-1, 1]`, so
/// `G = sqrt(d)`; the box has diameter `sqrt(d)`; the loss is 1-strongly
/// convex and its per-point values lie in `[0, d/2]`.
pub fn unit_box_quadratic<'a>(locations: &'a [Vec<f64>], curvature: Curvature) -> Result<LossSpec<'a>> {
    let d = locations
        .first()
        .map(|p| p.len())
        .ok_or(Error::invalid("locations", "universe must be nonempty"))?;
    if d == 0 || locations.iter().any(|p| p.len() != d || p.iter().any(|v| !(0.0..=1.0).contains(v))) {
        return Err(Error::invalid("locations", "every location must be a point of [0,1]^d"));
    }
    let unit = ValueRange::new(-1.0, 1.0)?;
    let spec = LossSpec::new(
        vec![unit; d],
        move |s, x, i| x[i] - locations[s as usize][i],
        libm::sqrt(d as f64),
        curvature,
        |x| x.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0)),
    )?
    .with_point_loss(ValueRange::new(0.0, d as f64 / 2.0)?, move |s, x| {
        let p = &locations[s as usize];
        x.iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / 2.0
    });
    Ok(spec)
}

/// Asks the oracle for each gradient coordinate at `x` and decodes the answers.
pub fn noisy_gradient(
    loss: &LossSpec<'_>,
    x: &[f64],
    oracle: &mut dyn QueryMechanism,
) -> Result<Vec<f64>> {
    noisy_gradient_raw(loss, x, oracle).map(|g| g.into_iter().map(|(_, decoded)| decoded).collect())
}

fn noisy_gradient_raw(
    loss: &LossSpec<'_>,
    x: &[f64],
    oracle: &mut dyn QueryMechanism,
) -> Result<Vec<(f64, f64)>> {
    if x.len() != loss.dim {
        return Err(Error::invalid("x", "dimension mismatch"));
    }
    (0..loss.dim)
        .map(|i| {
            let q = loss.coordinate_query(x, i);
            let raw = oracle.answer(&q)?;
            Ok((raw, loss.ranges[i].decode(raw)))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GdConfig {
    /// Optimisation queries per session.
    pub k: usize,
    /// Iterations per optimisation query.
    pub iterations: usize,
    pub ell: usize,
    pub alpha: f64,
    pub beta: f64,
    pub x0: Vec<f64>,
}

impl GdConfig {
    /// Iteration count from the schedule's guidance: `ceil(D^2 G^2 / alpha^2)`
    /// for convex losses, `ceil(G^2 / (alpha H))` for strongly convex ones
    /// (log factors dropped).
    pub fn guidance_iterations(loss: &LossSpec<'_>, alpha: f64) -> usize {
        let g2 = loss.gradient_bound * loss.gradient_bound;
        let t = match loss.curvature {
            Curvature::Convex { diameter } => diameter * diameter * g2 / (alpha * alpha),
            Curvature::StronglyConvex { modulus } => g2 / (alpha * modulus),
        };
        // Guard against representation error pushing an exact integer up.
        libm::ceil(t - 1e-9).max(1.0) as usize
    }

    pub fn new(loss: &LossSpec<'_>, k: usize, ell: usize, alpha: f64, beta: f64, x0: Vec<f64>) -> Result<Self> {
        let cfg = GdConfig {
            k,
            iterations: Self::guidance_iterations(loss, alpha),
            ell,
            alpha,
            beta,
            x0,
        };
        cfg.validate(loss)?;
        Ok(cfg)
    }

    pub fn with_iterations(mut self, iterations: usize) -> Self {
        self.iterations = iterations;
        self
    }

    pub fn validate(&self, loss: &LossSpec<'_>) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("k", "must be >= 1"));
        }
        if self.iterations == 0 {
            return Err(Error::invalid("iterations", "must be >= 1"));
        }
        if self.ell == 0 {
            return Err(Error::invalid("ell", "must be >= 1"));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::invalid("alpha", "must lie in (0, 1]"));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::invalid("beta", "must lie in (0, 1)"));
        }
        if self.x0.len() != loss.dim {
            return Err(Error::invalid("x0", "dimension mismatch"));
        }
        let mut projected = self.x0.clone();
        loss.project(&mut projected);
        if projected != self.x0 {
            return Err(Error::invalid("x0", "must lie in the domain"));
        }
        Ok(())
    }

    /// Independent descent runs in boosted mode: `max(1, ceil(ln(k/beta)))`.
    pub fn boosting_runs(&self) -> usize {
        libm::ceil(libm::log(self.k as f64 / self.beta)).max(1.0) as usize
    }

    /// Descent-oracle calls for the whole session: `k * T * d`, times the
    /// number of runs when boosted.
    pub fn oracle_rounds(&self, dim: usize, boosted: bool) -> usize {
        let runs = if boosted { self.boosting_runs() } else { 1 };
        self.k * runs * self.iterations * dim
    }

    /// Scoring queries for the whole boosted session, `k * runs`, or zero
    /// when a single run makes scoring unnecessary.
    pub fn scoring_rounds(&self) -> usize {
        match self.boosting_runs() {
            1 => 0,
            runs => self.k * runs,
        }
    }

    /// Settings for a separate scoring oracle over `n` points: in-expectation
    /// accuracy `alpha / 4` for the `k * runs` candidate scores.
    pub fn scoring_config(&self, n: usize, ell: usize) -> Result<Checked<SqMechConfig>> {
        config_from_accuracy(
            self.alpha / 4.0,
            self.beta,
            self.scoring_rounds().max(1),
            n,
            AccuracyMode::InExpectation { ell },
            Sampling::WithoutReplacement,
        )
    }

    /// In-expectation accuracy the gradient oracle is configured for:
    /// `alpha / (4 sqrt d)` for convex losses, `min(alpha/2, 1/T) / sqrt d`
    /// for strongly convex ones.
    pub fn oracle_alpha(&self, loss: &LossSpec<'_>) -> f64 {
        let root_d = libm::sqrt(loss.dim as f64);
        match loss.curvature {
            Curvature::Convex { .. } => self.alpha / (4.0 * root_d),
            Curvature::StronglyConvex { .. } => {
                (self.alpha / 2.0).min(1.0 / self.iterations as f64) / root_d
            }
        }
    }

    /// Statistical-query oracle settings for a session over `n` points,
    /// budgeted for the descent calls only; scoring through the same oracle
    /// needs [`GdConfig::scoring_rounds`] more.
    ///
    /// For strongly convex losses a warning is attached when the oracle's
    /// estimated in-expectation error `alpha'` (noise plus subsampling
    /// terms) violates `alpha' sqrt(d) <= 1/T`.
    pub fn oracle_config(&self, loss: &LossSpec<'_>, n: usize, boosted: bool) -> Result<Checked<SqMechConfig>> {
        self.validate(loss)?;
        let rounds = self.oracle_rounds(loss.dim, boosted);
        let mut checked = config_from_accuracy(
            self.oracle_alpha(loss),
            self.beta,
            rounds,
            n,
            AccuracyMode::InExpectation { ell: self.ell },
            Sampling::WithoutReplacement,
        )?;
        if let Curvature::StronglyConvex { .. } = loss.curvature {
            let (noise, sampling) = checked.value.expectation_terms(n);
            let estimate = (noise + sampling) * libm::sqrt(loss.dim as f64);
            let limit = 1.0 / self.iterations as f64;
            if estimate > limit {
                checked.warnings.push(Warning::OracleTooCoarse {
                    alpha_prime_sqrt_d: estimate,
                    limit,
                });
            }
        }
        Ok(checked)
    }
}

/// One coordinate of one iteration of a descent run.
#[derive(Debug, Clone, PartialEq)]
pub struct GdStep {
    pub iteration: usize,
    pub coordinate: usize,
    pub raw_answer: f64,
    pub decoded: f64,
    pub eta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GdRun {
    /// Average iterate `(1/T) sum_t x_t`.
    pub point: Vec<f64>,
    /// `x_1 .. x_T`.
    pub iterates: Vec<Vec<f64>>,
    pub steps: Vec<GdStep>,
}

/// Runs `T` projected steps `x_t = P(x_{t-1} - eta_t g_t)` with oracle
/// gradients and returns the average iterate.
///
/// If the oracle refuses a query the run stops, the oracle's transcript is
/// flagged invalid and [`Error::DescentAborted`] is returned.
pub fn gd_answer(loss: &LossSpec<'_>, cfg: &GdConfig, oracle: &mut dyn QueryMechanism) -> Result<GdRun> {
    cfg.validate(loss)?;
    let d = loss.dim;
    let mut x = cfg.x0.clone();
    let mut sum = vec![0.0; d];
    let mut iterates = Vec::with_capacity(cfg.iterations);
    let mut steps = Vec::with_capacity(cfg.iterations * d);
    for t in 1..=cfg.iterations {
        let eta = loss.curvature.step_size(loss.gradient_bound, t);
        let grad = match noisy_gradient_raw(loss, &x, oracle) {
            Ok(g) => g,
            Err(Error::BudgetExhausted { .. }) => {
                oracle.transcript_mut().invalidate();
                return Err(Error::DescentAborted {
                    completed_iterations: t - 1,
                });
            }
            Err(e) => return Err(e),
        };
        for (i, (raw, decoded)) in grad.into_iter().enumerate() {
            x[i] -= eta * decoded;
            steps.push(GdStep {
                iteration: t,
                coordinate: i,
                raw_answer: raw,
                decoded,
                eta,
            });
        }
        loss.project(&mut x);
        for (s, v) in sum.iter_mut().zip(&x) {
            *s += v;
        }
        iterates.push(x.clone());
    }
    let point = sum.into_iter().map(|s| s / cfg.iterations as f64).collect();
    Ok(GdRun {
        point,
        iterates,
        steps,
    })
}

/// How boosted candidates are scored.
pub enum Scorer<'s> {
    /// One statistical query per candidate through the descent oracle.
    SameOracle,
    /// One statistical query per candidate through a separate mechanism on
    /// the same sample; its privacy cost composes with the descent oracle's.
    Oracle(&'s mut dyn QueryMechanism),
    /// Caller-supplied loss estimate, for losses without a declared point loss.
    Evaluator(&'s mut dyn FnMut(&[f64]) -> Result<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoostedRun {
    pub point: Vec<f64>,
    pub runs: Vec<GdRun>,
    /// Evaluated loss per candidate; empty when only one run was made.
    pub scores: Vec<f64>,
    pub selected: usize,
}

/// Runs `max(1, ceil(ln(k/beta)))` independent descents and returns the
/// candidate with the smallest evaluated loss. With a single run no
/// scoring query is made.
pub fn gd_answer_boosted(
    loss: &LossSpec<'_>,
    cfg: &GdConfig,
    oracle: &mut dyn QueryMechanism,
    scorer: Scorer<'_>,
) -> Result<BoostedRun> {
    let count = cfg.boosting_runs();
    let mut runs = Vec::with_capacity(count);
    for _ in 0..count {
        runs.push(gd_answer(loss, cfg, oracle)?);
    }
    if count == 1 {
        let point = runs[0].point.clone();
        return Ok(BoostedRun {
            point,
            runs,
            scores: Vec::new(),
            selected: 0,
        });
    }
    let mut scorer = scorer;
    let mut scores = Vec::with_capacity(count);
    for run in &runs {
        let score = match &mut scorer {
            Scorer::Evaluator(eval) => eval(&run.point)?,
            Scorer::SameOracle | Scorer::Oracle(_) => {
                let (q, range) = loss.loss_query(&run.point).ok_or(Error::invalid(
                    "scorer",
                    "scoring by query needs a declared point loss",
                ))?;
                let raw = match &mut scorer {
                    Scorer::Oracle(m) => m.answer(&q)?,
                    _ => oracle.answer(&q)?,
                };
                range.decode(raw)
            }
        };
        scores.push(score);
    }
    let selected = scores
        .iter()
        .enumerate()
        .fold(0, |best, (i, s)| if *s < scores[best] { i } else { best });
    Ok(BoostedRun {
        point: runs[selected].point.clone(),
        runs,
        scores,
        selected,
    })
}

/// Noiseless oracle: answers `q(S)` exactly over the whole sample, in
/// dataset order. Used as the reference when checking descent trajectories.
pub struct ExactOracle<'d> {
    data: &'d Dataset,
    limit: usize,
    transcript: Transcript,
}

impl<'d> ExactOracle<'d> {
    pub fn new(data: &'d Dataset, limit: usize) -> Self {
        ExactOracle {
            data,
            limit,
            transcript: Transcript::default(),
        }
    }

    pub fn calls(&self) -> usize {
        self.transcript.len()
    }
}

impl QueryMechanism for ExactOracle<'_> {
    fn answer(&mut self, q: &StatQuery<'_>) -> Result<f64> {
        if self.transcript.len() >= self.limit {
            return Err(Error::BudgetExhausted {
                used: self.transcript.len(),
                limit: self.limit,
            });
        }
        let v = q.mean_over(self.data.points())?;
        self.transcript.push(v, self.data.len() as u64, 0);
        Ok(v)
    }

    fn remaining(&self) -> usize {
        self.limit - self.transcript.len()
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
