use adaquery_core::harness::KnownDistribution;
use adaquery_core::noise::{sample_laplace, LaplaceScale, ScoredChoice};
use adaquery_core::optimize::{gd_answer, unit_box_quadratic, Curvature, GdConfig};
use adaquery_core::privacy::{
    amplify_with_replacement, amplify_without_replacement, compose_per_query_epsilon,
};
use adaquery_core::scq::{counting_via_scq, scq_config};
use adaquery_core::sqmech::{subsample, QueryMechanism, Sampling, SqSession};
use adaquery_core::{
    BudgetLedger, CountingQuery, Dataset, PrivacyParams, SessionRng, SqMechConfig, StatQuery,
};
use proptest::prelude::*;
use rand::{RngCore, SeedableRng};

fn ell_n() -> impl Strategy<Value = (usize, usize)> {
    (1usize..5000).prop_flat_map(|n| (1..=n, Just(n)))
}

proptest! {
    #[test]
    fn amplification_never_exceeds_eps(eps in 0.0f64..5.0, (ell, n) in ell_n()) {
        let wo = amplify_without_replacement(eps, ell, n).unwrap();
        let w = amplify_with_replacement(eps, ell, n).unwrap();
        prop_assert!(wo <= eps && w <= eps);
        if ell < n && eps > 0.0 {
            prop_assert!(wo < eps);
        }
    }

    #[test]
    fn amplification_small_eps_bound(eps in 0.0f64..=1.0, (ell, n) in ell_n()) {
        let bound = 2.0 * ell as f64 / n as f64 * eps;
        prop_assert!(amplify_without_replacement(eps, ell, n).unwrap() <= bound);
        prop_assert!(amplify_with_replacement(eps, ell, n).unwrap() <= bound);
    }

    #[test]
    fn amplification_monotone(eps in 0.0f64..3.0, d_eps in 0.0f64..1.0, (ell, n) in ell_n()) {
        let ell2 = (ell + 1).min(n);
        for f in [amplify_without_replacement, amplify_with_replacement] {
            let base = f(eps, ell, n).unwrap();
            prop_assert!(f(eps, ell2, n).unwrap() >= base);
            prop_assert!(f(eps + d_eps, ell, n).unwrap() >= base);
        }
    }

    #[test]
    fn composition_scales_as_inverse_root_k(eps in 0.01f64..0.99, delta in 1e-9f64..0.5, k in 1usize..10_000, m in 1usize..20) {
        let t = PrivacyParams::new(eps, delta).unwrap();
        let a = compose_per_query_epsilon(t, k).unwrap();
        let b = compose_per_query_epsilon(t, k * m * m).unwrap();
        prop_assert!((a / m as f64 - b).abs() <= 1e-14 * a);
    }

    #[test]
    fn ledger_never_exceeds_k(k in 1usize..50, attempts in 0usize..100) {
        let mut ledger = BudgetLedger::new(PrivacyParams::new(0.5, 1e-3).unwrap(), k).unwrap();
        let ok = (0..attempts).filter(|_| ledger.charge().is_ok()).count();
        prop_assert_eq!(ok, attempts.min(k));
        prop_assert_eq!(ledger.queries_used(), attempts.min(k));
    }

    #[test]
    fn laplace_is_reproducible(b in 1e-3f64..100.0, seed: u64) {
        let s = LaplaceScale::new(b).unwrap();
        let mut r1 = SessionRng::seed_from_u64(seed);
        let mut r2 = SessionRng::seed_from_u64(seed);
        for _ in 0..16 {
            let x = sample_laplace(s, &mut r1);
            prop_assert!(x.is_finite());
            prop_assert_eq!(x.to_bits(), sample_laplace(s, &mut r2).to_bits());
        }
    }

    #[test]
    fn exp_mechanism_probabilities(utils in prop::collection::vec(-1e3f64..1e3, 1..20), eta in 1e-3f64..1e3) {
        let items: Vec<(usize, f64)> = utils.iter().copied().enumerate().collect();
        let c = ScoredChoice::new(items, eta).unwrap();
        let p = c.probabilities();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        for i in 0..utils.len() {
            for j in 0..utils.len() {
                if utils[i] > utils[j] {
                    prop_assert!(p[i] >= p[j]);
                }
            }
        }
    }

    #[test]
    fn subsample_without_replacement_is_distinct((ell, n) in ell_n(), seed: u64) {
        let data = Dataset::new((0..n as u32).collect(), n).unwrap();
        let mut rng = SessionRng::seed_from_u64(seed);
        let s = subsample(&data, ell, Sampling::WithoutReplacement, &mut rng).unwrap();
        let mut pts = s.points().to_vec();
        pts.sort_unstable();
        pts.dedup();
        prop_assert_eq!(pts.len(), ell);
    }

    #[test]
    fn clipped_answers_in_unit_interval(seed: u64, n in 10usize..500, values in prop::collection::vec(0.0f64..=1.0, 8)) {
        let mut rng = SessionRng::seed_from_u64(seed);
        let data = Dataset::new((0..n).map(|_| rng.next_u32() % 8).collect(), 8).unwrap();
        let cfg = SqMechConfig::custom(n.min(20), 0.1, 1e-3, 10).unwrap().with_clip(true);
        let mut session = SqSession::new(&data, cfg, rng).unwrap();
        let q = StatQuery::from_table(values);
        for _ in 0..10 {
            let a = session.answer(&q).unwrap();
            prop_assert!((0.0..=1.0).contains(&a));
        }
        prop_assert!(session.answer(&q).is_err());
        prop_assert!(session.transcript().records().iter().all(|r| r.samples_examined == n.min(20) as u64));
    }

    #[test]
    fn scq_counts_have_granularity_one_over_ell(seed: u64, ell in 1usize..200, bits in prop::collection::vec(any::<bool>(), 16)) {
        let mut rng = SessionRng::seed_from_u64(seed);
        let data = Dataset::new((0..1000).map(|_| rng.next_u32() % 16).collect(), 16).unwrap();
        let cfg = scq_config(0.2, 0.1, ell, 1000).unwrap().value;
        let mut ledger = BudgetLedger::new(cfg.target().unwrap(), ell).unwrap();
        let q = CountingQuery::from_bits(bits);
        let c = counting_via_scq(&data, &q, ell, &cfg, &mut ledger, &mut rng).unwrap();
        prop_assert_eq!(q.eval_count(), ell as u64);
        let scaled = c.value() * ell as f64;
        prop_assert!((scaled - scaled.round()).abs() < 1e-9);
    }

    #[test]
    fn descent_iterates_stay_in_box(seed: u64, x0 in prop::collection::vec(0.0f64..=1.0, 2), eps in 1e-4f64..0.5, strong: bool) {
        let mut rng = SessionRng::seed_from_u64(seed);
        let locs: Vec<Vec<f64>> = (0..8).map(|i| vec![(i % 3) as f64 / 2.0, (i % 5) as f64 / 4.0]).collect();
        let curv = if strong { Curvature::StronglyConvex { modulus: 1.0 } } else { Curvature::Convex { diameter: 2f64.sqrt() } };
        let loss = unit_box_quadratic(&locs, curv).unwrap();
        let data = KnownDistribution::uniform(8).unwrap().sample(50, &mut rng).unwrap();
        let cfg = GdConfig::new(&loss, 1, 5, 0.5, 0.1, x0).unwrap();
        let sq = SqMechConfig::custom(5, eps, 1e-3, cfg.oracle_rounds(2, false)).unwrap();
        let mut session = SqSession::new(&data, sq, rng).unwrap();
        let run = gd_answer(&loss, &cfg, &mut session).unwrap();
        prop_assert_eq!(session.transcript().len(), cfg.iterations * 2);
        for x in run.iterates.iter().chain(std::iter::once(&run.point)) {
            prop_assert!(x.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn step_schedules(g in 0.1f64..10.0, d in 0.1f64..10.0, h in 0.1f64..10.0, t in 1usize..10_000) {
        let c = Curvature::Convex { diameter: d };
        let s = Curvature::StronglyConvex { modulus: h };
        prop_assert!(c.step_size(g, t + 1) < c.step_size(g, t));
        prop_assert!(s.step_size(g, t + 1) < s.step_size(g, t));
        prop_assert!((c.step_size(g, t) * g * (t as f64).sqrt() - d).abs() <= 1e-12 * d);
        prop_assert!((s.step_size(g, t) * h * t as f64 - 2.0).abs() <= 1e-12);
    }
}
