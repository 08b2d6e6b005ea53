use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ctxval::learner::{learn, IterateSelection, LearnerConfig};
use ctxval::loss::{cap_grid, empirical_loss, sample_loss, true_loss_at_context};
use ctxval::metrics::{capped_gap_sup, levy_distance, wasserstein_distance};
use ctxval::model::{
    draw_samples, induced_value_distribution, ContextDistribution, LabeledSample, RewardFunction,
    WeightDistribution,
};
use ctxval::policies::{
    evaluate_pandora, evaluate_stopping, fair_cap, optimal_price, stopping_thresholds,
    weitzman_policy, EvalBudget, PandoraInstance,
};
use ctxval::selftest::oracles;
use ctxval::DiscreteValueDistribution;

fn atom() -> impl Strategy<Value = f64> {
    prop_oneof![0.0..=1.0f64, (0u32..=20).prop_map(|i| i as f64 * 0.05)]
}

fn dist() -> impl Strategy<Value = DiscreteValueDistribution> {
    prop::collection::vec((atom(), 0.05..1.0f64), 1..6).prop_map(|v| {
        let (a, w) = v.into_iter().unzip();
        DiscreteValueDistribution::new(a, w, 1.0).unwrap()
    })
}

fn point(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..=1.0f64, dim)
}

fn weights(dim: usize, max_atoms: usize) -> impl Strategy<Value = WeightDistribution> {
    prop::collection::vec((point(dim), 0.05..1.0f64), 1..=max_atoms).prop_map(|v| {
        let (a, w) = v.into_iter().unzip();
        WeightDistribution::new(a, w).unwrap()
    })
}

fn uniform_weights(dim: usize, k: usize) -> impl Strategy<Value = WeightDistribution> {
    prop::collection::vec(point(dim), k).prop_map(|a| WeightDistribution::uniform(a).unwrap())
}

fn samples(dim: usize, max: usize) -> impl Strategy<Value = Vec<LabeledSample>> {
    prop::collection::vec(
        (point(dim), 0.0..=1.0f64).prop_map(move |(context, y)| LabeledSample {
            context,
            label: y * dim as f64,
        }),
        1..=max,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn cdf_is_a_distribution_function(d in dist(), zs in prop::collection::vec(-0.5..1.5f64, 2..20)) {
        let mut zs = zs;
        zs.sort_by(f64::total_cmp);
        for w in zs.windows(2) {
            prop_assert!(d.cdf(w[0]) <= d.cdf(w[1]));
        }
        prop_assert_eq!(d.cdf(-1e-9 + d.min_atom()), 0.0);
        prop_assert_eq!(d.cdf(d.max_atom()), 1.0);
    }

    #[test]
    fn capped_expectation_endpoints(d in dist()) {
        prop_assert!((d.capped_expectation(0.0) - d.mean()).abs() < 1e-12);
        prop_assert!((d.capped_expectation(d.c_max()) - d.c_max()).abs() < 1e-12);
    }

    #[test]
    fn shift_matches_its_cdf_formula(d in dist(), eps in 0.0..0.5f64) {
        let s = d.shift_plus_eps(eps).unwrap();
        let mut zs: Vec<f64> = vec![0.0];
        for &a in d.atoms() {
            for z in [a - eps - 1e-7, a, a + eps, a - eps + 1e-7] {
                if z >= eps {
                    zs.push(z);
                }
            }
        }
        for z in zs {
            let want = (d.cdf(z + eps) + eps).min(1.0);
            prop_assert!((s.cdf(z) - want).abs() <= 1e-12, "z={} got {} want {}", z, s.cdf(z), want);
        }
        prop_assert!(d.dominance_violation(&s, 1e-12).is_none());
        prop_assert!(levy_distance(&d, &s) <= 2.0 * eps + 1e-9);
    }

    #[test]
    fn linear_images_are_dot_products(v in weights(3, 5), x in point(3)) {
        let f = RewardFunction::linear(3).unwrap();
        let d = induced_value_distribution(&v, &f, &x).unwrap();
        for a in v.atoms() {
            let dot: f64 = a.iter().zip(&x).map(|(p, q)| p * q).sum();
            prop_assert!(d.atoms().iter().any(|b| (b - dot).abs() <= 1e-12));
        }
    }

    #[test]
    fn true_loss_at_truth_is_sum_of_variances(v in weights(2, 5), x in point(2), steps in 1usize..10) {
        let f = RewardFunction::linear(2).unwrap();
        let grid = cap_grid(f.c_max, f.c_max / steps as f64).unwrap();
        let images: Vec<(f64, f64)> = v
            .atoms()
            .iter()
            .zip(v.weights())
            .map(|(a, &w)| (a.iter().zip(&x).map(|(p, q)| p * q).sum(), w))
            .collect();
        let want: f64 = grid
            .values()
            .iter()
            .map(|&c| {
                let mean: f64 = images.iter().map(|(r, w)| w * r.max(c)).sum();
                images.iter().map(|(r, w)| w * (r.max(c) - mean).powi(2)).sum::<f64>()
            })
            .sum();
        let got = true_loss_at_context(&v, &v, &f, &x, &grid).unwrap();
        prop_assert!((got - want).abs() <= 1e-12, "{} vs {}", got, want);
    }

    #[test]
    fn capped_expectation_is_convex_along_segments(
        a in uniform_weights(2, 3), b in uniform_weights(2, 3), x in point(2), c in 0.0..2.0f64
    ) {
        // The capped expectation itself is convex in the atoms; the squared
        // loss built on it is not (see `squared_loss_is_not_convex`).
        let f = RewardFunction::linear(2).unwrap();
        let at = |t: f64| {
            let atoms = a.atoms().iter().zip(b.atoms())
                .map(|(p, q)| p.iter().zip(q).map(|(u, w)| (1.0 - t) * u + t * w).collect())
                .collect();
            let v = WeightDistribution::uniform(atoms).unwrap();
            induced_value_distribution(&v, &f, &x).unwrap().capped_expectation(c)
        };
        prop_assert!(at(0.5) <= 0.5 * (at(0.0) + at(1.0)) + 1e-12);
    }

    #[test]
    fn empirical_loss_ignores_sample_order(v in uniform_weights(2, 3), s in samples(2, 12), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let f = RewardFunction::linear(2).unwrap();
        let grid = cap_grid(2.0, 0.25).unwrap();
        let mut shuffled = s.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let a = empirical_loss(&v, &s, &f, &grid).unwrap();
        let b = empirical_loss(&v, &shuffled, &f, &grid).unwrap();
        prop_assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn levy_is_a_metric(a in dist(), b in dist(), c in dist()) {
        let ab = levy_distance(&a, &b);
        prop_assert_eq!(ab, levy_distance(&b, &a));
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert!(levy_distance(&a, &c) <= ab + levy_distance(&b, &c) + 3e-9);
        prop_assert_eq!(levy_distance(&a, &a), 0.0);
        prop_assert_eq!(ab == 0.0, a.approx_eq(&b, 1e-12));
    }

    #[test]
    fn levy_bridge_and_wasserstein(a in dist(), b in dist()) {
        let l = levy_distance(&a, &b);
        prop_assert!(l <= (2.0 * capped_gap_sup(&a, &b, 1e-3)).sqrt() + 1e-6);
        prop_assert!(wasserstein_distance(&a, &b) <= 4.0 * l + 1e-9);
    }

    #[test]
    fn optimal_price_beats_price_grid(d in dist()) {
        let (_, best) = optimal_price(&d);
        let (_, grid) = oracles::grid_best_revenue(&d, 1e-3);
        prop_assert!(grid <= best + 1e-12);
    }

    #[test]
    fn fair_cap_transfer(d in dist(), scale in 0.001..0.2f64, o in 0.0..0.6f64, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dp = ctxval::selftest::gen::perturb(&mut rng, &d, scale);
        let eps = capped_gap_sup(&d, &dp, 1e-3);
        let sigma = fair_cap(&dp, o).unwrap();
        let g: f64 = d.iter().map(|(a, w)| w * (a - sigma).max(0.0)).sum();
        prop_assert!((g - o).abs() <= eps + 1e-6);
    }

    #[test]
    fn stopping_transfer(ds in prop::collection::vec(dist(), 1..4), scale in 0.001..0.2f64, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dps: Vec<_> = ds.iter().map(|d| ctxval::selftest::gen::perturb(&mut rng, d, scale)).collect();
        let eps = ds.iter().zip(&dps).map(|(a, b)| capped_gap_sup(a, b, 1e-3)).fold(0.0, f64::max);
        let slack = ds.len() as f64 * eps + 1e-6;
        let tp = stopping_thresholds(&dps).unwrap();
        let t = stopping_thresholds(&ds).unwrap();
        let on_dp = evaluate_stopping(&dps, &tp).unwrap();
        prop_assert!(evaluate_stopping(&ds, &tp).unwrap() >= on_dp - slack);
        prop_assert!(on_dp >= evaluate_stopping(&ds, &t).unwrap() - slack);
    }

    #[test]
    fn exact_evaluators_match_brute_force(
        ds in prop::collection::vec(dist(), 1..5), costs in prop::collection::vec(0.0..0.4f64, 4)
    ) {
        let costs = &costs[..ds.len()];
        let inst = PandoraInstance::new(ds.clone(), costs).unwrap();
        let pol = weitzman_policy(&inst).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let e = evaluate_pandora(&inst, &pol, &EvalBudget::default(), &mut rng).unwrap();
        prop_assert!(e.exact);
        prop_assert!((e.value - oracles::pandora_value(&ds, costs, &pol.fair_caps)).abs() <= 1e-9);
        let t = stopping_thresholds(&ds).unwrap();
        let s = evaluate_stopping(&ds, &t).unwrap();
        prop_assert!((s - oracles::stopping_value(&ds, &t.thresholds)).abs() <= 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn learner_contract(s in samples(2, 30), k in 1usize..4, iters in 1usize..60, seed in any::<u64>(), average in any::<bool>()) {
        let f = RewardFunction::linear(2).unwrap();
        let mut cfg = LearnerConfig::new(k, 0.5, iters);
        cfg.seed = seed;
        if average {
            cfg.selection = IterateSelection::Average;
        }
        let a = learn(&s, &f, &cfg).unwrap();
        let b = learn(&s, &f, &cfg).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.learned.atoms().iter().flatten().all(|c| (0.0..=1.0).contains(c)));
        if !average {
            prop_assert!((a.selected_objective - a.best_recorded()).abs() <= 1e-9);
        }
    }

    #[test]
    fn draw_samples_is_reproducible(v in weights(2, 4), seed in any::<u64>()) {
        let f = RewardFunction::linear(2).unwrap();
        let ctx = ContextDistribution::product_uniform(2, 0.25).unwrap();
        let a = draw_samples(&v, &ctx, &f, 50, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let b = draw_samples(&v, &ctx, &f, 50, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn induced_distribution_matches_sampled_labels() {
    let f = RewardFunction::linear(2).unwrap();
    let v = WeightDistribution::new(
        vec![vec![0.1, 0.9], vec![0.5, 0.5], vec![0.8, 0.3], vec![0.2, 0.2]],
        vec![0.1, 0.4, 0.3, 0.2],
    )
    .unwrap();
    let x = vec![0.7, 0.4];
    let ctx = ContextDistribution::point(x.clone()).unwrap();
    let n = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut labels: Vec<f64> = draw_samples(&v, &ctx, &f, n, &mut rng)
        .unwrap()
        .into_iter()
        .map(|s| s.label)
        .collect();
    let d = induced_value_distribution(&v, &f, &x).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut direct: Vec<f64> = (0..n).map(|_| d.sample(&mut rng)).collect();
    labels.sort_by(f64::total_cmp);
    direct.sort_by(f64::total_cmp);
    // Two-sample KS statistic evaluated at every observed value.
    let ecdf = |v: &[f64], z: f64| v.partition_point(|&a| a <= z) as f64 / v.len() as f64;
    let ks = labels
        .iter()
        .chain(&direct)
        .map(|&z| (ecdf(&labels, z) - ecdf(&direct, z)).abs())
        .fold(0.0, f64::max);
    assert!(ks < 0.02, "KS statistic {ks}");
}

#[test]
fn squared_loss_is_not_convex() {
    // Single atom, d = 1, x = 1, y = 0.75, caps {0, 0.5}: the loss is
    // (v - 0.75)^2 + (max{0.5, v} - 0.75)^2, whose second term is not
    // convex in v where the cap switches on.
    let f = RewardFunction::linear(1).unwrap();
    let grid = cap_grid(1.0, 0.5).unwrap();
    let s = LabeledSample {
        context: vec![1.0],
        label: 0.75,
    };
    let at = |v: f64| sample_loss(&WeightDistribution::point(vec![v]).unwrap(), &s, &f, &grid).unwrap();
    assert!(at(0.5) > 0.5 * (at(0.4) + at(0.6)) + 1e-3);
}
