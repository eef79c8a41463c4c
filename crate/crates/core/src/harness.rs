//! Known distributions, adaptive adversaries and the monitor.
//!
//! Everything here needs the distribution itself and so only serves as a
//! ground-truth oracle for tests and experiments; nothing in this module
//! belongs on a privacy-facing path.

use alloc::boxed::Box;
use alloc::vec::Vec;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, RngCore, SeedableRng};

use crate::data::{CountingQuery, Dataset, ElementId, StatQuery};
use crate::error::{Error, Result};
use crate::noise::{exp_mechanism_select, ScoredChoice};
use crate::scq::{ScqConfig, ScqSession};
use crate::sqmech::{Clock, QueryMechanism, SqMechConfig, SqSession, Transcript};
use crate::SessionRng;

/// A distribution over the universe `{0, .., m-1}` given by its weights.
#[derive(Debug, Clone, PartialEq)]
pub struct KnownDistribution {
    weights: Vec<f64>,
    uniform: bool,
}

impl KnownDistribution {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("weights", "universe must be nonempty"));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::invalid("weights", "must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("weights", "must sum to 1"));
        }
        if u32::try_from(weights.len()).is_err() {
            return Err(Error::invalid("weights", "universe too large"));
        }
        Ok(KnownDistribution {
            weights,
            uniform: false,
        })
    }

    pub fn uniform(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::invalid("m", "universe must be nonempty"));
        }
        let mut dist = Self::new(alloc::vec![1.0 / m as f64; m])?;
        dist.uniform = true;
        Ok(dist)
    }

    pub fn point_mass(m: usize, at: ElementId) -> Result<Self> {
        if at as usize >= m {
            return Err(Error::invalid("at", "element id outside the universe"));
        }
        let mut weights = alloc::vec![0.0; m];
        weights[at as usize] = 1.0;
        Self::new(weights)
    }

    pub fn universe_size(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Draws `n` i.i.d. points.
    pub fn sample<R: RngCore + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Dataset> {
        let m = self.weights.len();
        let points = if self.uniform {
            (0..n).map(|_| rng.gen_range(0..m as ElementId)).collect()
        } else {
            let index = WeightedIndex::new(&self.weights)
                .map_err(|_| Error::invalid("weights", "not a valid distribution"))?;
            (0..n).map(|_| index.sample(rng) as ElementId).collect()
        };
        Dataset::new(points, m)
    }
}

/// `q(D) = sum_x D(x) q(x)`, by brute force over the universe.
///
/// Evaluations are not counted: this is the oracle, not a mechanism.
pub fn exact_query_mean(dist: &KnownDistribution, q: &StatQuery<'_>) -> f64 {
    dist.weights
        .iter()
        .enumerate()
        .map(|(x, w)| w * q.peek(x as ElementId))
        .sum()
}

/// The empirical estimate `q(S)`, evaluating `q` on all `n` points.
pub fn naive_empirical_answer(data: &Dataset, q: &StatQuery<'_>) -> Result<f64> {
    q.mean_over(data.points())
}

/// Answers every query with its exact empirical mean; no noise, no budget.
pub struct NaiveMechanism<'d> {
    data: &'d Dataset,
    transcript: Transcript,
    clock: Option<Clock>,
}

impl<'d> NaiveMechanism<'d> {
    pub fn new(data: &'d Dataset) -> Self {
        NaiveMechanism {
            data,
            transcript: Transcript::default(),
            clock: None,
        }
    }

    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = Some(clock);
        self
    }
}

impl QueryMechanism for NaiveMechanism<'_> {
    fn answer(&mut self, q: &StatQuery<'_>) -> Result<f64> {
        let start = self.clock.map(|c| c());
        let v = naive_empirical_answer(self.data, q)?;
        let elapsed = match (self.clock, start) {
            (Some(c), Some(s)) => c().saturating_sub(s),
            _ => 0,
        };
        self.transcript.push(v, self.data.len() as u64, elapsed);
        Ok(v)
    }

    fn remaining(&self) -> usize {
        usize::MAX
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

/// Queries issued so far, as value tables over the universe, and the
/// answers received.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AttackState {
    queries: Vec<Vec<bool>>,
    answers: Vec<f64>,
}

impl AttackState {
    pub fn queries(&self) -> &[Vec<bool>] {
        &self.queries
    }

    pub fn answers(&self) -> &[f64] {
        &self.answers
    }

    pub fn len(&self) -> usize {
        self.answers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.answers.is_empty()
    }

    fn record(&mut self, query: Vec<bool>, answer: f64) {
        self.queries.push(query);
        self.answers.push(answer);
    }
}

/// An analyst choosing each counting query from the transcript so far.
pub trait Adversary {
    /// Next query as a table over the universe, or `None` when finished.
    fn next_query(&mut self, state: &AttackState) -> Option<Vec<bool>>;
}

/// Runs the interaction until the adversary stops or the mechanism refuses.
pub fn interact(
    mechanism: &mut dyn QueryMechanism,
    adversary: &mut dyn Adversary,
) -> Result<AttackState> {
    let mut state = AttackState::default();
    while let Some(table) = adversary.next_query(&state) {
        let answer = {
            let q = CountingQuery::new(|x| table[x as usize]);
            mechanism.answer(q.as_stat())?
        };
        state.record(table, answer);
    }
    Ok(state)
}

fn table_mean(dist: &KnownDistribution, table: &[bool]) -> f64 {
    dist.weights
        .iter()
        .zip(table)
        .filter(|(_, b)| **b)
        .map(|(w, _)| w)
        .sum()
}

fn table_empirical(data: &Dataset, table: &[bool]) -> f64 {
    let ones = data.points().iter().filter(|x| table[**x as usize]).count();
    ones as f64 / data.len() as f64
}

/// Sign-correlation attack.
///
/// Phase one asks `k - 1` independent uniformly random counting queries and
/// records on which side of `q_i(D)` each answer fell. Phase two asks the
/// query that is 1 exactly on the points whose phase-one memberships agree
/// with the majority of those signs, so points over-represented in the
/// sample tend to be selected.
pub struct OverfittingAdversary<'a, R> {
    dist: &'a KnownDistribution,
    k: usize,
    rng: R,
    truths: Vec<f64>,
}

impl<'a, R: RngCore> OverfittingAdversary<'a, R> {
    pub fn new(dist: &'a KnownDistribution, k: usize, rng: R) -> Result<Self> {
        if k < 2 {
            return Err(Error::invalid("k", "the attack needs k >= 2"));
        }
        Ok(OverfittingAdversary {
            dist,
            k,
            rng,
            truths: Vec::with_capacity(k),
        })
    }

    /// `q_i(D)` for every query issued so far.
    pub fn truths(&self) -> &[f64] {
        &self.truths
    }

    fn aggregate(&self, state: &AttackState) -> Vec<bool> {
        let m = self.dist.universe_size();
        let mut votes = alloc::vec![0i64; m];
        for (i, table) in state.queries().iter().enumerate() {
            let diff = state.answers()[i] - self.truths[i];
            let sign = if diff > 0.0 {
                1
            } else if diff < 0.0 {
                -1
            } else {
                continue;
            };
            for (v, bit) in votes.iter_mut().zip(table) {
                *v += if *bit { sign } else { -sign };
            }
        }
        votes.into_iter().map(|v| v > 0).collect()
    }
}

impl<R: RngCore> Adversary for OverfittingAdversary<'_, R> {
    fn next_query(&mut self, state: &AttackState) -> Option<Vec<bool>> {
        let issued = state.len();
        let table = if issued + 1 < self.k {
            let m = self.dist.universe_size();
            let mut table = Vec::with_capacity(m);
            while table.len() < m {
                let word = self.rng.next_u64();
                let take = (m - table.len()).min(64);
                table.extend((0..take).map(|b| word >> b & 1 == 1));
            }
            table
        } else if issued + 1 == self.k {
            self.aggregate(state)
        } else {
            return None;
        };
        self.truths.push(table_mean(self.dist, &table));
        Some(table)
    }
}

/// Mechanism answering the attack's queries.
#[derive(Debug, Clone, PartialEq)]
pub enum AttackMechanism {
    NaiveEmpirical,
    Subsampled(SqMechConfig),
    Scq { config: ScqConfig, ell: usize },
}

impl AttackMechanism {
    /// A fresh session on `data`, with its own random stream.
    pub fn session<'d>(
        &self,
        data: &'d Dataset,
        rng: SessionRng,
    ) -> Result<Box<dyn QueryMechanism + 'd>> {
        Ok(match self {
            AttackMechanism::NaiveEmpirical => Box::new(NaiveMechanism::new(data)),
            AttackMechanism::Subsampled(cfg) => Box::new(SqSession::new(data, cfg.clone(), rng)?),
            AttackMechanism::Scq { config, ell } => {
                Box::new(ScqSession::new(data, config.clone(), *ell, rng)?)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackOutcome {
    /// `|a_k - q_k(D)|` for the phase-two query.
    pub final_error: f64,
    /// `|a_i - q_i(D)|` for every query, in order.
    pub errors: Vec<f64>,
    /// `q_k(S) - q_k(D)`: how far the sample itself overfits the last query.
    pub final_sample_gap: f64,
    pub state: AttackState,
    pub transcript: Transcript,
}

impl AttackOutcome {
    pub fn max_error(&self) -> f64 {
        self.errors.iter().fold(0.0, |a, b| a.max(*b))
    }
}

/// Draws `S ~ D^n` and runs the sign-correlation attack with `k` queries.
pub fn run_overfitting_attack<R: RngCore + ?Sized>(
    mechanism: &AttackMechanism,
    dist: &KnownDistribution,
    n: usize,
    k: usize,
    rng: &mut R,
) -> Result<AttackOutcome> {
    let data = dist.sample(n, rng)?;
    let adversary_seed = rng.next_u64();
    attack_on_sample(mechanism, dist, &data, k, adversary_seed, rng.next_u64())
}

/// The attack against a given sample. Equal `adversary_seed`s give equal
/// phase-one queries, so different mechanisms can be compared in pairs.
pub fn attack_on_sample(
    mechanism: &AttackMechanism,
    dist: &KnownDistribution,
    data: &Dataset,
    k: usize,
    adversary_seed: u64,
    session_seed: u64,
) -> Result<AttackOutcome> {
    let mut adversary = OverfittingAdversary::new(dist, k, SessionRng::seed_from_u64(adversary_seed))?;
    let mut session = mechanism.session(data, SessionRng::seed_from_u64(session_seed))?;
    let state = interact(session.as_mut(), &mut adversary)?;
    let errors: Vec<f64> = state
        .answers()
        .iter()
        .zip(adversary.truths())
        .map(|(a, t)| (a - t).abs())
        .collect();
    let last = state.queries().last().expect("k >= 2 queries were issued");
    let final_sample_gap = table_empirical(data, last) - table_mean(dist, last);
    Ok(AttackOutcome {
        final_error: *errors.last().expect("k >= 2 answers"),
        errors,
        final_sample_gap,
        transcript: session.transcript().clone(),
        state,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonitorRecord {
    /// Queries of round `t`, as tables over the universe.
    pub queries: Vec<Vec<Vec<bool>>>,
    /// `u[t][i] = |q_{t,i}(S_t) - q_{t,i}(D)|`.
    pub utilities: Vec<Vec<f64>>,
    /// Selected `(t, i)`.
    pub selected: (usize, usize),
    pub eta: f64,
}

impl MonitorRecord {
    pub fn selected_utility(&self) -> f64 {
        self.utilities[self.selected.0][self.selected.1]
    }

    pub fn max_utility(&self) -> f64 {
        self.utilities.iter().flatten().fold(0.0, |a, b| a.max(*b))
    }

    pub fn pair_count(&self) -> usize {
        self.utilities.iter().map(Vec::len).sum()
    }

    /// `max u - ln(#pairs) / eta`, the expected-utility guarantee of the selection.
    pub fn utility_floor(&self) -> f64 {
        self.max_utility() - libm::log(self.pair_count() as f64) / self.eta
    }
}

/// Simulates `rounds` independent sessions on fresh samples `S_t ~ D^n`
/// and selects one issued query by the exponential mechanism with
/// `eta = eps * n / 2` and utility `|q(S_t) - q(D)|`.
///
/// `session` builds a mechanism for one sample and `adversary` a fresh
/// analyst; both receive a per-round random stream.
pub fn run_monitor<'a, R, M, A>(
    mut session: M,
    mut adversary: A,
    dist: &KnownDistribution,
    n: usize,
    rounds: usize,
    eps: f64,
    rng: &mut R,
) -> Result<MonitorRecord>
where
    R: RngCore + ?Sized,
    M: for<'d> FnMut(&'d Dataset, SessionRng) -> Result<Box<dyn QueryMechanism + 'd>>,
    A: FnMut(SessionRng) -> Result<Box<dyn Adversary + 'a>>,
{
    if rounds == 0 {
        return Err(Error::invalid("rounds", "must be >= 1"));
    }
    if !(eps > 0.0) || n == 0 {
        return Err(Error::invalid("eps", "need eps > 0 and n >= 1"));
    }
    let mut queries = Vec::with_capacity(rounds);
    let mut utilities = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        let data = dist.sample(n, rng)?;
        let mut mech = session(&data, SessionRng::seed_from_u64(rng.next_u64()))?;
        let mut analyst = adversary(SessionRng::seed_from_u64(rng.next_u64()))?;
        let state = interact(mech.as_mut(), analyst.as_mut())?;
        let u: Vec<f64> = state
            .queries()
            .iter()
            .map(|t| (table_empirical(&data, t) - table_mean(dist, t)).abs())
            .collect();
        utilities.push(u);
        queries.push(state.queries);
    }
    let eta = eps * n as f64 / 2.0;
    let items: Vec<((usize, usize), f64)> = utilities
        .iter()
        .enumerate()
        .flat_map(|(t, row)| row.iter().enumerate().map(move |(i, u)| ((t, i), *u)))
        .collect();
    let choices = ScoredChoice::new(items, eta)?;
    let selected = *exp_mechanism_select(&choices, rng);
    Ok(MonitorRecord {
        queries,
        utilities,
        selected,
        eta,
    })
}

/// Issues `k` independent uniformly random counting queries.
pub struct RandomQueries<R> {
    universe: usize,
    k: usize,
    rng: R,
}

impl<R: RngCore> RandomQueries<R> {
    pub fn new(universe: usize, k: usize, rng: R) -> Self {
        RandomQueries { universe, k, rng }
    }
}

impl<R: RngCore> Adversary for RandomQueries<R> {
    fn next_query(&mut self, state: &AttackState) -> Option<Vec<bool>> {
        (state.len() < self.k).then(|| (0..self.universe).map(|_| self.rng.gen()).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn distribution_validation() {
        assert!(KnownDistribution::new(vec![]).is_err());
        assert!(KnownDistribution::new(vec![0.5, 0.6]).is_err());
        assert!(KnownDistribution::new(vec![-0.5, 1.5]).is_err());
        assert!(KnownDistribution::new(vec![0.25; 4]).is_ok());
        assert!(KnownDistribution::point_mass(3, 3).is_err());
    }

    #[test]
    fn exact_mean_simple_cases() {
        let dist = KnownDistribution::uniform(10).unwrap();
        let q = StatQuery::new(|x| (x % 2) as f64);
        assert!((exact_query_mean(&dist, &q) - 0.5).abs() < 1e-15);
        assert_eq!(q.eval_count(), 0);
        let mass = KnownDistribution::point_mass(10, 7).unwrap();
        let q = StatQuery::new(|x| x as f64 / 10.0);
        assert_eq!(exact_query_mean(&mass, &q), 0.7);
    }

    #[test]
    fn naive_answer_is_empirical_mean() {
        let data = Dataset::new(vec![0, 1, 2, 3], 4).unwrap();
        let ones = StatQuery::new(|_| 1.0);
        assert_eq!(naive_empirical_answer(&data, &ones).unwrap(), 1.0);
        let half = StatQuery::new(|x| if x < 2 { 1.0 } else { 0.0 });
        assert_eq!(naive_empirical_answer(&data, &half).unwrap(), 0.5);
        assert_eq!(half.eval_count(), 4);
    }

    #[test]
    fn sampling_point_mass() {
        let mut rng = SessionRng::seed_from_u64(1);
        let dist = KnownDistribution::point_mass(5, 2).unwrap();
        let s = dist.sample(100, &mut rng).unwrap();
        assert!(s.points().iter().all(|p| *p == 2));
    }

    #[test]
    fn attack_issues_k_queries_and_last_depends_on_answers() {
        let dist = KnownDistribution::uniform(100).unwrap();
        let mut rng = SessionRng::seed_from_u64(5);
        let out = run_overfitting_attack(&AttackMechanism::NaiveEmpirical, &dist, 200, 20, &mut rng).unwrap();
        assert_eq!(out.state.len(), 20);
        assert_eq!(out.transcript.len(), 20);
        assert_eq!(out.errors.len(), 20);
        // Naive answers are exact, so the final error is the sample gap.
        assert!((out.final_error - out.final_sample_gap.abs()).abs() < 1e-12);

        // Same phase-one queries with flipped answers flip the aggregate.
        let mut adv = OverfittingAdversary::new(&dist, 3, SessionRng::seed_from_u64(9)).unwrap();
        let mut state = AttackState::default();
        for _ in 0..2 {
            let q = adv.next_query(&state).unwrap();
            let a = adv.truths().last().unwrap() + 0.1;
            state.record(q, a);
        }
        let up = adv.aggregate(&state);
        state.answers.iter_mut().zip(adv.truths()).for_each(|(a, t)| *a = t - 0.1);
        let down = adv.aggregate(&state);
        assert!(up.iter().zip(&down).all(|(u, d)| !(*u && *d)));
    }

    #[test]
    fn attack_rejects_single_query() {
        let dist = KnownDistribution::uniform(4).unwrap();
        let mut rng = SessionRng::seed_from_u64(0);
        assert!(run_overfitting_attack(&AttackMechanism::NaiveEmpirical, &dist, 10, 1, &mut rng).is_err());
    }

    fn naive_factory<'d>(data: &'d Dataset, _: SessionRng) -> Result<Box<dyn QueryMechanism + 'd>> {
        Ok(Box::new(NaiveMechanism::new(data)))
    }

    #[test]
    fn single_pair_monitor() {
        let dist = KnownDistribution::uniform(16).unwrap();
        let mut rng = SessionRng::seed_from_u64(3);
        let rec = run_monitor(
            naive_factory,
            |r| Ok(Box::new(RandomQueries::new(16, 1, r)) as Box<dyn Adversary>),
            &dist,
            50,
            1,
            0.5,
            &mut rng,
        )
        .unwrap();
        assert_eq!(rec.selected, (0, 0));
        assert_eq!(rec.eta, 12.5);
        assert!(rec.utilities[0][0] >= 0.0);
    }

    #[test]
    fn monitor_with_equal_utilities_is_uniform() {
        // Point mass: every sample equals D, so every utility is 0.
        let dist = KnownDistribution::point_mass(8, 0).unwrap();
        let mut rng = SessionRng::seed_from_u64(4);
        let (rounds, k, runs) = (2, 3, 10_000);
        let mut hits = vec![0usize; rounds * k];
        for _ in 0..runs {
            let rec = run_monitor(
                naive_factory,
                |r| Ok(Box::new(RandomQueries::new(8, k, r)) as Box<dyn Adversary>),
                &dist,
                20,
                rounds,
                0.5,
                &mut rng,
            )
            .unwrap();
            assert_eq!(rec.max_utility(), 0.0);
            hits[rec.selected.0 * k + rec.selected.1] += 1;
        }
        let p = 1.0 / (rounds * k) as f64;
        let se = libm::sqrt(p * (1.0 - p) / runs as f64);
        for h in hits {
            assert!((h as f64 / runs as f64 - p).abs() <= 3.0 * se, "{h}");
        }
    }
}
