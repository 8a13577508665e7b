use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nnsurv::bounds::{bound_rhs, BoundInputs, BoundKind};
use nnsurv::data::{read_csv, write_csv_to, CsvSchema};
use nnsurv::estimators::{estimate_cum_hazard, estimate_survival, find_neighbors};
use nnsurv::evaluation::{concordance_index, ipec, mse_vs_truth, CensoringEstimator, IpecConfig};
use nnsurv::forest::{fit_forest, ForestConfig};
use nnsurv::model::{fit_model, Estimator, MethodSpec, Params};
use nnsurv::selection::{cross_validate, fold_assignment, Criterion, ParamGrid};
use nnsurv::stepfn::{kaplan_meier, nelson_aalen};
use nnsurv::synthetic::{FeatureLaw, GroundTruthModel};
use nnsurv::{Dataset, Kernel, Metric, NeighborMode, NeighborQuery, Standardizer, StepFunction};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Positive times, so every survival curve starts at 1.
fn random_data(seed: u64, n: usize, dim: usize, distinct_times: bool) -> Dataset {
    let mut r = rng(seed);
    let features: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| r.gen_range(-2.0..2.0)).collect()).collect();
    let times: Vec<f64> = if distinct_times {
        let mut t: Vec<f64> = (1..=n).map(|i| i as f64).collect();
        t.shuffle(&mut r);
        t
    } else {
        (0..n).map(|_| r.gen_range(1..=6) as f64).collect()
    };
    let events: Vec<bool> = (0..n).map(|_| r.gen_bool(0.6)).collect();
    Dataset::from_columns(features, &times, &events).unwrap()
}

fn assert_survival_shape(s: &StepFunction) {
    assert_eq!(s.value_before_first(), 1.0);
    let mut prev = 1.0;
    for &v in s.values_after() {
        assert!((0.0..=1.0).contains(&v), "value {v} outside [0,1]");
        assert!(v <= prev, "survival increased from {prev} to {v}");
        prev = v;
    }
    assert_eq!(s.eval(0.0), 1.0);
}

fn assert_hazard_shape(h: &StepFunction) {
    assert_eq!(h.value_before_first(), 0.0);
    let mut prev = 0.0;
    for &v in h.values_after() {
        assert!(v.is_finite() && v >= prev, "hazard decreased from {prev} to {v}");
        prev = v;
    }
    assert_eq!(h.eval(0.0), 0.0);
}

fn modes(n: usize) -> Vec<NeighborMode> {
    let k = n.div_ceil(2);
    vec![
        NeighborMode::Knn { k },
        NeighborMode::Knn { k: n },
        NeighborMode::WeightedKnn { k, kernel: Kernel::Triangle },
        NeighborMode::FixedRadius { h: 1.5 },
        NeighborMode::Kernel { kernel: Kernel::Box, h: 2.0 },
        NeighborMode::Kernel { kernel: Kernel::Epanechnikov, h: 2.0 },
        NeighborMode::Kernel { kernel: Kernel::TruncatedGaussian { sigma: 1.0 }, h: 2.0 },
    ]
}

fn step_survival(r: &mut ChaCha8Rng, horizon: f64) -> StepFunction {
    let m = r.gen_range(0..6);
    let mut jumps: Vec<f64> = (0..m).map(|_| r.gen_range(0.0..horizon)).collect();
    jumps.sort_by(f64::total_cmp);
    jumps.dedup();
    let mut v = 1.0;
    let values: Vec<f64> = jumps
        .iter()
        .map(|_| {
            v *= r.gen_range(0.0..1.0);
            v
        })
        .collect();
    StepFunction::new(jumps, values, 1.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn metric_is_symmetric_and_satisfies_triangle(
        a in prop::collection::vec(-1e3f64..1e3, 3),
        b in prop::collection::vec(-1e3f64..1e3, 3),
        c in prop::collection::vec(-1e3f64..1e3, 3),
    ) {
        for m in [Metric::L1, Metric::L2] {
            let ab = m.distance(&a, &b).unwrap();
            let ba = m.distance(&b, &a).unwrap();
            let ac = m.distance(&a, &c).unwrap();
            let cb = m.distance(&c, &b).unwrap();
            prop_assert!((ab - ba).abs() <= 1e-12 * ab.max(1.0));
            prop_assert!(ab <= ac + cb + 1e-12 * (ac + cb).max(1.0));
            prop_assert_eq!(m.distance(&a, &a).unwrap(), 0.0);
        }
    }

    #[test]
    fn csv_round_trip(seed in any::<u64>(), n in 1usize..30, dim in 1usize..4) {
        let data = random_data(seed, n, dim, false);
        let schema = CsvSchema::new("time", "event");
        let mut buf = Vec::new();
        write_csv_to(&data, &mut buf, &schema).unwrap();
        let (back, _) = read_csv(buf.as_slice(), &schema).unwrap();
        prop_assert_eq!(back.len(), data.len());
        prop_assert_eq!(back.times(), data.times());
        prop_assert_eq!(back.events(), data.events());
        for (a, b) in back.records().iter().zip(data.records()) {
            for (x, y) in a.features.iter().zip(&b.features) {
                prop_assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0));
            }
        }
    }

    #[test]
    fn standardizing_twice_changes_nothing(seed in any::<u64>(), n in 2usize..30, constant_col in any::<bool>()) {
        let mut data = random_data(seed, n, 3, false);
        if constant_col {
            data = data.map_features(|x| vec![x[0], 7.0, x[2]]);
        }
        let once = Standardizer::fit(&data).unwrap().transform_dataset(&data).unwrap();
        let twice = Standardizer::fit(&once).unwrap().transform_dataset(&once).unwrap();
        for (a, b) in once.records().iter().zip(twice.records()) {
            for (x, y) in a.features.iter().zip(&b.features) {
                prop_assert!((x - y).abs() <= 1e-9, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn km_and_na_shapes(seed in any::<u64>(), n in 1usize..25, weighted in any::<bool>()) {
        let data = random_data(seed, n, 1, false);
        let all: Vec<usize> = (0..n).collect();
        let mut r = rng(seed ^ 1);
        let w: Vec<f64> = (0..n).map(|_| r.gen_range(0.1..3.0)).collect();
        let weights = weighted.then_some(w.as_slice());
        assert_survival_shape(&kaplan_meier(&data, &all, weights).unwrap());
        assert_hazard_shape(&nelson_aalen(&data, &all, weights).unwrap());
    }

    #[test]
    fn estimator_outputs_are_well_shaped_and_deterministic(seed in any::<u64>(), n in 2usize..30) {
        let data = random_data(seed, n, 2, false);
        let point = data.record(seed as usize % n).features.clone();
        for mode in modes(n) {
            for metric in [Metric::L1, Metric::L2] {
                let q = NeighborQuery::new(point.clone(), mode, metric, seed);
                let s = estimate_survival(&data, &q).unwrap();
                let h = estimate_cum_hazard(&data, &q).unwrap();
                assert_survival_shape(&s);
                assert_hazard_shape(&h);
                prop_assert_eq!(&s, &estimate_survival(&data, &q).unwrap());
                prop_assert_eq!(&h, &estimate_cum_hazard(&data, &q).unwrap());
            }
        }
    }

    #[test]
    fn kernel_neighborhood_shrinks_with_bandwidth(seed in any::<u64>(), n in 2usize..40, h in 0.05f64..4.0, shrink in 0.0f64..1.0) {
        let data = random_data(seed, n, 2, false);
        let point = vec![0.3, -0.2];
        for kernel in [Kernel::Box, Kernel::Triangle, Kernel::Epanechnikov, Kernel::TruncatedGaussian { sigma: 2.0 }] {
            let set = |h: f64| {
                let q = NeighborQuery::new(point.clone(), NeighborMode::Kernel { kernel, h }, Metric::L2, 0);
                let mut idx = find_neighbors(&data, &q).map(|nb| nb.indices).unwrap_or_default();
                idx.sort_unstable();
                idx
            };
            let wide = set(h);
            let narrow = set(h * shrink.max(1e-3));
            prop_assert!(narrow.iter().all(|i| wide.binary_search(i).is_ok()));
        }
    }

    #[test]
    fn na_never_exceeds_minus_log_km_without_ties(seed in any::<u64>(), n in 1usize..30) {
        let data = random_data(seed, n, 2, true);
        let point = data.record(0).features.clone();
        let k = 1 + seed as usize % n;
        for mode in [
            NeighborMode::Knn { k },
            NeighborMode::FixedRadius { h: 1.0 },
            NeighborMode::Kernel { kernel: Kernel::Box, h: 1.5 },
        ] {
            let q = NeighborQuery::new(point.clone(), mode, Metric::L2, seed);
            let s = estimate_survival(&data, &q).unwrap();
            let h = estimate_cum_hazard(&data, &q).unwrap();
            for t in 0..=(n + 1) {
                let t = t as f64 + 0.5;
                let sv = s.eval(t);
                if sv > 0.0 {
                    prop_assert!(h.eval(t) <= -sv.ln() + 1e-12, "t={t}: {} > {}", h.eval(t), -sv.ln());
                }
            }
        }
    }

    #[test]
    fn cindex_range_and_monotone_invariance(
        seed in any::<u64>(),
        n in 2usize..40,
    ) {
        let mut r = rng(seed);
        let times: Vec<f64> = (0..n).map(|_| r.gen_range(0..10) as f64).collect();
        let events: Vec<bool> = (0..n).map(|_| r.gen_bool(0.7)).collect();
        let scores: Vec<f64> = (0..n).map(|_| r.gen_range(-3..4) as f64 * 0.5).collect();
        let Ok(c) = concordance_index(&times, &events, &scores) else {
            return Ok(());
        };
        prop_assert!((0.0..=1.0).contains(&c));
        let warped: Vec<f64> = scores.iter().map(|s| s.powi(3) + 5.0 * s - 2.0).collect();
        prop_assert_eq!(c, concordance_index(&times, &events, &warped).unwrap());
        let exp: Vec<f64> = scores.iter().map(|s| s.exp()).collect();
        prop_assert_eq!(c, concordance_index(&times, &events, &exp).unwrap());
    }

    #[test]
    fn ipec_is_bounded_by_horizon_over_floor(
        seed in any::<u64>(),
        n in 1usize..20,
        tau in 0.1f64..5.0,
        theta_lb in prop::sample::select(vec![1e-6, 1e-3, 0.1, 0.5]),
    ) {
        let mut r = rng(seed);
        let times: Vec<f64> = (0..n).map(|_| r.gen_range(0.0..6.0)).collect();
        let events: Vec<bool> = (0..n).map(|_| r.gen_bool(0.5)).collect();
        let surv: Vec<StepFunction> = (0..n).map(|_| step_survival(&mut r, 6.0)).collect();
        let cens: Vec<StepFunction> = (0..n).map(|_| step_survival(&mut r, 6.0)).collect();
        let cfg = IpecConfig { theta_lb, tau };
        let v = ipec(&times, &events, &surv, &cens, &cfg).unwrap();
        prop_assert!(v >= 0.0);
        prop_assert!(v <= tau / theta_lb * (1.0 + 1e-12), "{v} > {}", tau / theta_lb);
    }

    #[test]
    fn bounds_do_not_grow_with_k_n_or_epsilon(
        n in 10usize..100_000,
        k in 1usize..5000,
        eps in 0.01f64..0.95,
        theta in 0.05f64..0.5,
        ball_mass in 0.01f64..1.0,
        kappa in 0.05f64..1.0,
        dk in 1usize..1000,
        dn in 1usize..10_000,
        de in 0.0f64..0.04,
    ) {
        let base = BoundInputs { n, k, epsilon: eps, theta, ball_mass, kappa, ..BoundInputs::default() };
        for kind in BoundKind::ALL {
            let at = |inp: &BoundInputs| bound_rhs(kind, inp).unwrap().total;
            let b = at(&base);
            let more_k = at(&BoundInputs { k: k + dk, ..base.clone() });
            let more_n = at(&BoundInputs { n: n + dn, ..base.clone() });
            let more_eps = at(&BoundInputs { epsilon: eps + de, ..base.clone() });
            prop_assert!(more_k <= b && more_n <= b && more_eps <= b, "{kind:?}: {b} -> {more_k} {more_n} {more_eps}");
        }
    }

    #[test]
    fn folds_partition_indices(n in 2usize..200, folds in 2usize..10, seed in any::<u64>()) {
        prop_assume!(folds <= n);
        let parts = fold_assignment(n, folds, seed).unwrap();
        prop_assert_eq!(parts.len(), folds);
        let mut all: Vec<usize> = parts.concat();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        let sizes: Vec<usize> = parts.iter().map(Vec::len).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn true_cum_hazard_is_minus_log_survival(x in 0.0f64..1.0, t in 0.0f64..5.0, b in -2.0f64..2.0, q in 0.5f64..3.0) {
        let models = [
            GroundTruthModel::exp_regression(1.0, vec![b], 0.5, vec![-b]).unwrap(),
            GroundTruthModel::weibull_regression(q, 1.0, vec![b], 0.5, vec![0.0]).unwrap(),
        ];
        for m in models {
            let s = m.true_survival(&[x], t);
            prop_assume!(s > 0.0);
            let h = m.true_cum_hazard(&[x], t);
            prop_assert!((h + s.ln()).abs() <= 1e-12 * h.max(1.0));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(30))]

    #[test]
    fn forest_routing_and_weights(seed in any::<u64>(), n in 10usize..40, n_trees in 1usize..6) {
        let data = random_data(seed, n, 2, false);
        let cfg = ForestConfig { n_trees, min_leaf: 2, seed, ..ForestConfig::default() };
        let forest = fit_forest(&data, &cfg).unwrap();
        for tree in &forest.trees {
            let mut seen = vec![0usize; n];
            for leaf in &tree.leaves {
                for &j in &leaf.routed {
                    seen[j] += 1;
                }
            }
            prop_assert!(seen.iter().all(|&c| c == 1));
            for (j, rec) in data.records().iter().enumerate() {
                prop_assert!(tree.leaves[tree.route(&rec.features)].routed.contains(&j));
            }
        }
        let mut r = rng(seed ^ 7);
        for _ in 0..5 {
            let x = vec![r.gen_range(-3.0..3.0), r.gen_range(-3.0..3.0)];
            for w in forest.adaptive_kernel_weights(&x).unwrap() {
                let scaled = w * n_trees as f64;
                prop_assert!((scaled - scaled.round()).abs() < 1e-9 && (0.0..=1.0).contains(&w));
            }
            assert_survival_shape(&forest.predict_survival(&x).unwrap());
            assert_survival_shape(&forest.predict_adaptive_kernel_survival(&data, &x).unwrap());
            assert_hazard_shape(&forest.predict_cum_hazard(&x).unwrap());
        }
        prop_assert_eq!(&forest, &fit_forest(&data, &cfg).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn selection_ignores_grid_order(seed in any::<u64>(), shuffle_seed in any::<u64>()) {
        let model = GroundTruthModel::exp_regression(1.0, vec![2.0], 0.5, vec![0.0]).unwrap();
        let data = model.sample(60, seed).unwrap();
        let mut ks = vec![1, 2, 4, 8, 16, 32, 4];
        let method = MethodSpec::new(Estimator::Knn, Metric::L2);
        let run = |ks: Vec<usize>, criterion| {
            let grid = ParamGrid { k_values: ks, bandwidth_values: vec![], forest_grid: vec![] };
            cross_validate(&data, &method, &grid, 3, criterion, seed).unwrap().best
        };
        for criterion in [
            Criterion::CIndex,
            Criterion::Ipec(CensoringEstimator::SameMethod),
            Criterion::Ipec(CensoringEstimator::MarginalKm),
        ] {
            let reference = run(ks.clone(), criterion);
            ks.shuffle(&mut rng(shuffle_seed));
            prop_assert_eq!(reference, run(ks.clone(), criterion));
        }
    }
}

#[test]
fn small_k_beats_full_pooling_when_covariates_matter() {
    let model = GroundTruthModel::exp_regression(0.1, vec![6.0], 0.05, vec![0.0]).unwrap();
    let data = model.sample(300, 11).unwrap();
    let folds = 5;
    let full = data.len() - data.len() / folds;
    let method = MethodSpec::new(Estimator::Knn, Metric::L2);

    let tau = 2.0;
    let points: Vec<Vec<f64>> = (0..50).map(|i| vec![(i as f64 + 0.5) / 50.0]).collect();
    let excess = |k: usize| {
        let fitted = fit_model(&data, &method, &Params::K(k), 0).unwrap();
        let est: Vec<StepFunction> = points.iter().map(|x| fitted.predict_survival(x).unwrap()).collect();
        mse_vs_truth(&est, &model, &points, tau).unwrap().excess
    };
    assert!(excess(4) < excess(data.len()), "{} vs {}", excess(4), excess(data.len()));

    let grid = ParamGrid {
        k_values: vec![4, full],
        bandwidth_values: vec![],
        forest_grid: vec![],
    };
    let cv = cross_validate(&data, &method, &grid, folds, Criterion::CIndex, 3).unwrap();
    assert_eq!(cv.best, Params::K(4), "{:?}", cv.scores);
}

/// Probability integral transform: `F(T|X)` is uniform when the sampler
/// matches the closed form, whatever the feature law.
#[test]
fn sampled_times_follow_the_closed_form() {
    let n = 10_000;
    let crit = 1.63 / (n as f64).sqrt();
    let models = [
        GroundTruthModel::exp_regression(1.0, vec![1.0, -0.5], 0.5, vec![0.3, 0.0]).unwrap(),
        GroundTruthModel::weibull_regression(2.0, 1.0, vec![0.8], 1.0, vec![-1.0]).unwrap(),
        GroundTruthModel::weibull_mixture(2.0, 1.0, 2.0, 1.0, 2.0, 50.0).unwrap(),
    ];
    for (mi, m) in models.iter().enumerate() {
        let (data, latent) = m.sample_with_truth(n, 100 + mi as u64).unwrap();
        for (pick, censoring) in [(0usize, false), (1, true)] {
            let mut u: Vec<f64> = data
                .records()
                .iter()
                .zip(&latent)
                .map(|(rec, &(t, c))| {
                    let x = &rec.features;
                    let v = if pick == 0 { t } else { c };
                    let tail = if censoring { m.true_censoring(x, v) } else { m.true_survival(x, v) };
                    1.0 - tail
                })
                .collect();
            u.sort_by(f64::total_cmp);
            let ks = u
                .iter()
                .enumerate()
                .map(|(i, &v)| (v - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - v).abs()))
                .fold(0.0, f64::max);
            assert!(ks < crit, "model {mi} censoring={censoring}: KS {ks} >= {crit}");
        }
    }
}

/// Observed-time tail at the model's `τ` stays above `θ` for every feature
/// value, estimated by sampling with the feature pinned.
#[test]
fn observed_tail_at_tau_is_at_least_theta() {
    let samples = 10_000;
    let mut r = rng(5);

    let mixture = GroundTruthModel::weibull_mixture(2.0, 1.0, 2.0, 1.0, 2.0, 50.0).unwrap();
    let (theta, tau) = mixture.theta_tau().unwrap();
    for x in 1..=100i64 {
        let pinned = GroundTruthModel {
            feature_law: FeatureLaw::UniformInt { lo: x, hi: x },
            ..mixture.clone()
        };
        check_tail(&pinned, tau, theta, samples, x as u64);
    }

    let reg = GroundTruthModel::exp_regression(1.0, vec![1.0], 0.5, vec![-0.5]).unwrap();
    let (theta, tau) = reg.theta_tau().unwrap();
    for i in 0..900 {
        let x: f64 = r.gen();
        let (lt, lc) = reg.rates(&[x]);
        let flat = GroundTruthModel::exp_regression(lt, vec![0.0], lc, vec![0.0]).unwrap();
        check_tail(&flat, tau, theta, samples, 1000 + i);
    }
}

fn check_tail(m: &GroundTruthModel, tau: f64, theta: f64, samples: usize, seed: u64) {
    let data = m.sample(samples, seed).unwrap();
    let p = data.times().iter().filter(|&&y| y > tau).count() as f64 / samples as f64;
    let sigma = (p * (1.0 - p) / samples as f64).sqrt();
    assert!(p >= theta - 3.0 * sigma, "tail {p} < {theta} - 3*{sigma}");
}
