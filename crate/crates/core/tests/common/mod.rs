//! Strategies and checks shared by the property suites and the acceptance run.
#![allow(dead_code)]

use crpslab::distributions::{
    cdf_l2_divergence, crps, crps_empirical, crps_gaussian, crps_gaussian_grad, crps_integral, first_abs_moment,
    w1_distance, GaussianLS, MixtureSpec, PredictiveDistribution, QuadratureConfig, WeightedEmpirical,
};
use crpslab::models::{
    drf_fit, drf_predict, drf_weights, drn_grad, knn_predict, Activation, DrfConfig, DrnParams, KnnModel,
};
use crpslab::pipeline::Dataset;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

pub type Check = std::result::Result<(), TestCaseError>;

/// Runs `f` on `cases` deterministic draws of `strategy`.
pub fn run<S: Strategy>(cases: u32, strategy: S, f: impl Fn(S::Value) -> Check) -> Result<(), String> {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    runner.run(&strategy, f).map_err(|e| e.to_string())
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

// ---- strategies

pub fn empirical(max_atoms: usize, range: f64) -> impl Strategy<Value = WeightedEmpirical> {
    prop::collection::vec((-range..range, 0.01f64..1.0), 1..=max_atoms).prop_map(|v| {
        let (a, w): (Vec<f64>, Vec<f64>) = v.into_iter().unzip();
        WeightedEmpirical::from_unnormalized(a, w).unwrap()
    })
}

pub fn gaussian() -> impl Strategy<Value = GaussianLS> {
    (-10.0f64..10.0, 0.01f64..10.0).prop_map(|(m, s)| GaussianLS::new(m, s).unwrap())
}

pub fn simplex(m: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.001f64..1.0, m).prop_map(|v| {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    })
}

/// Empirical, Gaussian, or a two-component mixture of them.
pub fn any_distribution() -> impl Strategy<Value = PredictiveDistribution> {
    prop_oneof![
        empirical(8, 10.0).prop_map(PredictiveDistribution::from),
        gaussian().prop_map(PredictiveDistribution::from),
        (empirical(5, 10.0), gaussian(), 0.05f64..0.95).prop_map(|(e, g, w)| {
            MixtureSpec::new(vec![e.into(), g.into()], vec![w, 1.0 - w]).unwrap().into()
        }),
    ]
}

/// Small regression sample with `n` rows and `d` covariates.
pub fn dataset(n: std::ops::RangeInclusive<usize>, d: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Dataset> {
    (n, d).prop_flat_map(|(n, d)| {
        (prop::collection::vec(-3.0f64..3.0, n * d), prop::collection::vec(-20.0f64..20.0, n))
            .prop_map(move |(x, y)| Dataset::from_flat(x, y, d).unwrap())
    })
}

// ---- checks

/// Mean score under G over G's atoms is minimized by forecasting G, with the
/// gap equal to the cdf divergence.
pub fn propriety((atoms, g, f): (Vec<f64>, Vec<f64>, Vec<f64>)) -> Check {
    let gd = WeightedEmpirical::from_unnormalized(atoms.clone(), g.clone()).unwrap();
    let fd = WeightedEmpirical::from_unnormalized(atoms.clone(), f).unwrap();
    let mean = |forecast: &WeightedEmpirical| {
        gd.atoms().iter().zip(gd.weights()).map(|(a, w)| w * crps_empirical(forecast, *a)).sum::<f64>()
    };
    let (sf, sg) = (mean(&fd), mean(&gd));
    prop_assert!(sf >= sg - 1e-12, "S(F,G) = {sf} < S(G,G) = {sg}");
    let div = cdf_l2_divergence(&fd.clone().into(), &gd.clone().into()).unwrap();
    if div > 1e-8 {
        prop_assert!(sf > sg, "not strict: divergence {div}");
    }
    prop_assert!((sf - sg - div).abs() < 1e-10, "gap {} vs divergence {div}", sf - sg);
    Ok(())
}

pub fn propriety_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
    (1usize..=5).prop_flat_map(|k| {
        (
            prop::collection::vec(-10.0f64..10.0, k),
            prop::collection::vec(0.01f64..1.0, k),
            prop::collection::vec(0.01f64..1.0, k),
        )
    })
}

pub fn oracle_empirical((f, y): (WeightedEmpirical, f64)) -> Check {
    let a = crps_empirical(&f, y);
    let b = crps_integral(&f.into(), y, &QuadratureConfig::default()).unwrap();
    prop_assert!((a - b).abs() <= 1e-9, "closed form {a} vs integral {b}");
    Ok(())
}

pub fn oracle_gaussian((g, z): (GaussianLS, f64)) -> Check {
    let y = g.m() + z * g.sigma();
    let a = crps_gaussian(&g, y);
    let b = crps_integral(&g.into(), y, &QuadratureConfig::default()).unwrap();
    prop_assert!((a - b).abs() <= 1e-6, "closed form {a} vs integral {b}");
    Ok(())
}

pub fn upper_bound((f, y): (PredictiveDistribution, f64)) -> Check {
    let s = crps(&f, y);
    let bound = y.abs() + first_abs_moment(&f);
    prop_assert!(s <= bound + 1e-12, "S = {s} > |y| + m1 = {bound}");
    Ok(())
}

pub fn lipschitz((f1, f2, y): (PredictiveDistribution, PredictiveDistribution, f64)) -> Check {
    let d = (crps(&f1, y) - crps(&f2, y)).abs();
    let w = w1_distance(&f1, &f2).unwrap();
    prop_assert!(d <= 2.0 * w + 1e-8, "|S1 - S2| = {d} > 2 W1 = {}", 2.0 * w);
    Ok(())
}

/// Pairs whose CRPS is exact: empirical-empirical or Gaussian-Gaussian.
pub fn lipschitz_strategy() -> impl Strategy<Value = (PredictiveDistribution, PredictiveDistribution, f64)> {
    prop_oneof![
        (empirical(8, 10.0), empirical(8, 10.0)).prop_map(|(a, b)| (a.into(), b.into())),
        (gaussian(), gaussian()).prop_map(|(a, b)| (a.into(), b.into())),
        (empirical(6, 10.0), gaussian()).prop_map(|(a, b)| (a.into(), b.into())),
    ]
    .prop_flat_map(|(a, b)| (Just(a), Just(b), -15.0f64..15.0))
}

pub fn mixture_lipschitz((comps, l1, l2): (Vec<WeightedEmpirical>, Vec<f64>, Vec<f64>)) -> Check {
    let dists: Vec<PredictiveDistribution> = comps.into_iter().map(Into::into).collect();
    let top = dists.iter().map(first_abs_moment).fold(0.0, f64::max);
    let a: PredictiveDistribution = MixtureSpec::new(dists.clone(), l1.clone()).unwrap().into();
    let b: PredictiveDistribution = MixtureSpec::new(dists, l2.clone()).unwrap().into();
    let w = w1_distance(&a, &b).unwrap();
    let norm: f64 = l1.iter().zip(&l2).map(|(x, y)| (x - y).abs()).sum();
    prop_assert!(w <= top * norm + 1e-10, "W1 = {w} > {}", top * norm);
    Ok(())
}

pub fn mixture_strategy() -> impl Strategy<Value = (Vec<WeightedEmpirical>, Vec<f64>, Vec<f64>)> {
    (2usize..=4).prop_flat_map(|m| (prop::collection::vec(empirical(6, 10.0), m), simplex(m), simplex(m)))
}

pub fn location_scale((m1, s1, m2, s2): (f64, f64, f64, f64)) -> Check {
    let a: PredictiveDistribution = GaussianLS::new(m1, s1).unwrap().into();
    let b: PredictiveDistribution = GaussianLS::new(m2, s2).unwrap().into();
    let w = w1_distance(&a, &b).unwrap();
    let base_m1 = first_abs_moment(&GaussianLS::standard().into());
    let bound = (m1 - m2).abs() + base_m1 * (s1 - s2).abs();
    prop_assert!(w <= bound + 1e-7, "W1 = {w} > {bound}");
    Ok(())
}

pub fn location_scale_strategy() -> impl Strategy<Value = (f64, f64, f64, f64)> {
    (-5.0f64..5.0, 0.05f64..5.0, -5.0f64..5.0, 0.05f64..5.0)
}

pub fn gaussian_gradient((g, y): (GaussianLS, f64)) -> Check {
    let grad = crps_gaussian_grad(&g, y);
    let hm = 1e-6 * g.m().abs().max(1.0);
    let hs = 1e-6 * g.sigma();
    let at = |m: f64, s: f64| crps_gaussian(&GaussianLS::new(m, s).unwrap(), y);
    let fd_m = (at(g.m() + hm, g.sigma()) - at(g.m() - hm, g.sigma())) / (2.0 * hm);
    let fd_s = (at(g.m(), g.sigma() + hs) - at(g.m(), g.sigma() - hs)) / (2.0 * hs);
    prop_assert!(close(grad.d_m, fd_m, 1e-5), "d_m {} vs {fd_m}", grad.d_m);
    prop_assert!(close(grad.d_sigma, fd_s, 1e-5), "d_sigma {} vs {fd_s}", grad.d_sigma);
    Ok(())
}

pub fn gaussian_gradient_strategy() -> impl Strategy<Value = (GaussianLS, f64)> {
    (gaussian(), -4.0f64..4.0).prop_map(|(g, z)| (g, g.m() + z * g.sigma()))
}

pub fn drn_gradient((theta, x, y, hidden, act): (Vec<f64>, Vec<f64>, f64, usize, Activation)) -> Check {
    let d = x.len();
    let p = DrnParams::from_vec(&theta, d, hidden, act).unwrap();
    let (grad, _) = drn_grad(&p, &x, y).unwrap();
    let score = |t: &[f64]| {
        let q = DrnParams::from_vec(t, d, hidden, act).unwrap();
        crps_gaussian(&crpslab::models::drn_predict(&q, &x).unwrap(), y)
    };
    for i in 0..theta.len() {
        let h = 1e-6 * theta[i].abs().max(1.0);
        let mut up = theta.clone();
        let mut dn = theta.clone();
        up[i] += h;
        dn[i] -= h;
        let fd = (score(&up) - score(&dn)) / (2.0 * h);
        prop_assert!(close(grad[i], fd, 1e-4), "coordinate {i}: {} vs {fd}", grad[i]);
    }
    Ok(())
}

pub fn drn_gradient_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, f64, usize, Activation)> {
    (1usize..=3, 0usize..=4, prop_oneof![Just(Activation::Tanh), Just(Activation::Relu)]).prop_flat_map(
        |(d, h, act)| {
            (
                prop::collection::vec(-1.5f64..1.5, DrnParams::count(d, h)),
                prop::collection::vec(-2.0f64..2.0, d),
                -3.0f64..3.0,
                Just(h),
                Just(act),
            )
        },
    )
}

/// Forest weights are a probability vector supported on the leaves that contain x.
pub fn drf_simplex((data, x, trees, seed): (Dataset, Vec<f64>, usize, u64)) -> Check {
    let cfg = DrfConfig {
        num_trees: trees,
        seed,
        ..DrfConfig::default()
    };
    let model = drf_fit(&data, &cfg).unwrap();
    let x = &x[..data.d()];
    let w = drf_weights(&model, x).unwrap();
    prop_assert_eq!(w.len(), data.n());
    prop_assert!(w.iter().all(|&v| v >= 0.0));
    prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    let mut reachable = vec![false; data.n()];
    for t in &model.trees {
        for &i in t.leaf_for(x) {
            reachable[i as usize] = true;
        }
    }
    for (i, (&v, &r)) in w.iter().zip(&reachable).enumerate() {
        prop_assert!(r || v == 0.0, "point {i} has weight {v} outside every leaf");
    }
    Ok(())
}

pub fn drf_strategy() -> impl Strategy<Value = (Dataset, Vec<f64>, usize, u64)> {
    (dataset(2..=25, 1..=3), prop::collection::vec(-3.5f64..3.5, 3), 1usize..=12, any::<u64>())
}

/// KNN and forest predictions stay inside the range of the training responses.
pub fn moment_bound((data, x, k, seed): (Dataset, Vec<f64>, usize, u64)) -> Check {
    let x = &x[..data.d()];
    let top = data.y().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let knn = KnnModel::fit(&data, k.min(data.n()), false).unwrap();
    let m1 = first_abs_moment(&knn_predict(&knn, x).unwrap().into());
    prop_assert!(m1 <= top + 1e-12, "knn m1 {m1} > {top}");
    let forest = drf_fit(
        &data,
        &DrfConfig {
            num_trees: 8,
            seed,
            ..DrfConfig::default()
        },
    )
    .unwrap();
    let m1 = first_abs_moment(&drf_predict(&forest, x).unwrap().into());
    prop_assert!(m1 <= top + 1e-12, "drf m1 {m1} > {top}");
    Ok(())
}

pub fn moment_strategy() -> impl Strategy<Value = (Dataset, Vec<f64>, usize, u64)> {
    (dataset(2..=25, 1..=3), prop::collection::vec(-3.5f64..3.5, 3), 1usize..=10, any::<u64>())
}
