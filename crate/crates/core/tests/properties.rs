use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use univport::fgp::{portfolio_from_generator, verify_fg_inequality, AffinePiece, GeneratingFunction, PairRegion};
use univport::ldp::{growth_rate, log_optimal_weights, rate_profile, FiniteStateModel, SolverOptions};
use univport::market::{empirical_pair_measure, markov_grid_path, MarkovChain};
use univport::portfolio::{growth_rate_via_empirical, relative_value_to, ConstantWeights, PortfolioMap, SharedMap};
use univport::universal::{cover_value_identity_check, evolve, Prior};
use univport::SimplexPoint;

fn simplex(n: usize) -> impl Strategy<Value = SimplexPoint> {
    prop::collection::vec(0.01f64..1.0, n).prop_map(|v| {
        let s: f64 = v.iter().sum();
        SimplexPoint::new(v.iter().map(|x| x / s).collect()).unwrap()
    })
}

fn affine_generator(n: usize) -> impl Strategy<Value = GeneratingFunction> {
    prop::collection::vec((prop::collection::vec(0.0f64..2.0, n), 0.0f64..1.0), 1..5).prop_map(|pieces| {
        let pieces = pieces
            .into_iter()
            .map(|(mut slope, b)| {
                slope[0] += 0.1;
                AffinePiece::new(slope, b)
            })
            .collect();
        GeneratingFunction::min_affine(pieces).unwrap()
    })
}

fn generator(n: usize) -> impl Strategy<Value = GeneratingFunction> {
    let gm = simplex(n).prop_map(|w| GeneratingFunction::geometric_mean(w).unwrap());
    let leaf = prop_oneof![gm, affine_generator(n)];
    (leaf.clone(), leaf, 0.0f64..1.0)
        .prop_map(|(a, b, l)| GeneratingFunction::log_blend(vec![(a, l), (b, 1.0 - l)]).unwrap())
}

fn random_chain(seed: u64, n: usize, k: usize) -> MarkovChain {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let states = (0..k)
        .map(|_| SimplexPoint::sample_uniform_with_floor(&mut rng, n, 0.02))
        .collect();
    let transition = (0..k)
        .map(|_| {
            let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 0.05).collect();
            let s: f64 = raw.iter().sum();
            raw.iter().map(|x| x / s).collect()
        })
        .collect();
    MarkovChain::new(states, transition).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fg_inequality_holds_for_generated_portfolios(g in generator(3), seed in any::<u64>()) {
        let pi = portfolio_from_generator(g.clone()).unwrap();
        let report = verify_fg_inequality(&pi, &g, 200, seed, PairRegion::default()).unwrap();
        prop_assert!(report.passed, "min slack {}", report.min_slack);
    }

    #[test]
    fn generated_weights_lie_in_the_simplex(g in generator(4), p in simplex(4)) {
        let pi = portfolio_from_generator(g).unwrap();
        let w = pi.evaluate(&p).unwrap();
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(w.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn generator_json_round_trip(g in generator(3)) {
        let text = serde_json::to_string(&g).unwrap();
        let back: GeneratingFunction = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, g);
    }

    #[test]
    fn supergradient_is_tangent(g in generator(3), p in simplex(3)) {
        let v = g.supergradient_log(&p);
        prop_assert!(v.iter().sum::<f64>().abs() < 1e-9 * (1.0 + v.iter().map(|x| x.abs()).sum::<f64>()));
    }

    #[test]
    fn growth_equals_empirical_integral(seed in any::<u64>(), w in simplex(3), t in 1usize..300) {
        let chain = random_chain(seed, 3, 3);
        let path = markov_grid_path(&chain, 0, seed, t).unwrap();
        let map = ConstantWeights::new(w);
        let direct = relative_value_to(&map, &path, t).unwrap().growth_rate(t);
        let via = growth_rate_via_empirical(&map, &empirical_pair_measure(&path, t).unwrap()).unwrap();
        prop_assert!((direct - via).abs() < 1e-12);
    }

    #[test]
    fn posterior_is_normalised_and_below_best(seed in any::<u64>(), atoms in 1usize..20) {
        let chain = random_chain(seed, 2, 3);
        let path = markov_grid_path(&chain, 1, seed, 60).unwrap();
        let prior = Prior::constant_cloud(2, atoms).unwrap();
        for wd in evolve(&prior, &path, 60).unwrap() {
            prop_assert!((wd.posterior().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(wd.log_mixture_value() <= wd.log_best_value() + 1e-12);
        }
    }

    #[test]
    fn cover_identity_on_random_priors(seed in any::<u64>(), atoms in 1usize..12) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let maps: Vec<SharedMap> = (0..atoms)
            .map(|_| Arc::new(ConstantWeights::new(SimplexPoint::sample_uniform(&mut rng, 3))) as SharedMap)
            .collect();
        let raw: Vec<f64> = (0..atoms).map(|_| rng.random::<f64>() + 0.01).collect();
        let s: f64 = raw.iter().sum();
        let mut weights: Vec<f64> = raw.iter().map(|x| x / s).collect();
        let head: f64 = weights[1..].iter().sum();
        weights[0] = 1.0 - head;
        let prior = Prior::new(maps.into_iter().zip(weights).collect()).unwrap();
        let path = markov_grid_path(&random_chain(seed, 3, 4), 0, seed, 200).unwrap();
        prop_assert!(cover_value_identity_check(&prior, &path, 200).unwrap() < 1e-10);
    }

    #[test]
    fn solver_dominates_sampled_points(seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(2..=4);
        let k = rng.random_range(1..=4);
        let returns: Vec<Vec<f64>> = (0..k).map(|_| (0..n).map(|_| rng.random_range(0.6..1.7)).collect()).collect();
        let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 0.01).collect();
        let s: f64 = raw.iter().sum();
        let probs: Vec<f64> = raw.iter().map(|x| x / s).collect();
        let sol = log_optimal_weights(&probs, &returns, SolverOptions::default()).unwrap();
        prop_assert!(sol.gap < 1e-10);
        for _ in 0..100 {
            let x = SimplexPoint::sample_uniform(&mut rng, n);
            prop_assert!(univport::ldp::expected_log_return(&x, &probs, &returns) <= sol.objective + 1e-12);
        }
    }

    #[test]
    fn rate_profile_is_permutation_equivariant(seed in any::<u64>(), shift in 0usize..5) {
        let chain = random_chain(seed, 2, 3);
        let model = FiniteStateModel::from_chain(&chain).unwrap();
        let prior = Prior::constant_cloud(2, 5).unwrap();
        let family: Vec<SharedMap> = prior.atoms().to_vec();
        let mut rotated = family.clone();
        rotated.rotate_left(shift);
        let a = rate_profile(&family, &model).unwrap();
        let b = rate_profile(&rotated, &model).unwrap();
        prop_assert_eq!(a.best_growth, b.best_growth);
        for (i, row) in b.rows.iter().enumerate() {
            prop_assert_eq!(row, &a.rows[(i + shift) % 5]);
        }
        prop_assert!(a.rows.iter().all(|r| r.rate >= 0.0));
        prop_assert!(a.rows.iter().any(|r| r.rate == 0.0));
    }

    #[test]
    fn growth_rate_is_concave_in_the_portfolio(seed in any::<u64>(), a in simplex(3), b in simplex(3), l in 0.0f64..1.0) {
        let model = FiniteStateModel::from_chain(&random_chain(seed, 3, 3)).unwrap();
        let mix: Vec<f64> = a.iter().zip(b.iter()).map(|(x, y)| l * x + (1.0 - l) * y).collect();
        let w = |p: &[f64]| growth_rate(&ConstantWeights::from_coords(p.to_vec()).unwrap(), &model).unwrap();
        prop_assert!(w(&mix) >= l * w(&a) + (1.0 - l) * w(&b) - 1e-13);
    }
}
