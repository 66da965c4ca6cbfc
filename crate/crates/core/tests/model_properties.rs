mod common;

use common::*;
use crpslab::models::{drf_fit, drf_predict, drn_predict, emos_predict, Activation, DrfConfig, DrnParams, EmosParams};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn drn_gradient_matches_finite_differences(case in drn_gradient_strategy()) {
        drn_gradient(case)?;
    }

    #[test]
    fn forest_weights_lie_on_the_simplex(case in drf_strategy()) {
        drf_simplex(case)?;
    }

    #[test]
    fn nonparametric_first_moment_below_max_response(case in moment_strategy()) {
        moment_bound(case)?;
    }

    #[test]
    fn scales_are_positive(
        theta in prop::collection::vec(-60.0f64..60.0, 2 * (1 + 2)),
        x in prop::collection::vec(-100.0f64..100.0, 2),
    ) {
        let p = EmosParams::from_vec(&theta, 2).unwrap();
        prop_assert!(emos_predict(&p, &x).unwrap().sigma() > 0.0);
    }

    #[test]
    fn drn_scales_are_positive(
        theta in prop::collection::vec(-20.0f64..20.0, DrnParams::count(2, 3)),
        x in prop::collection::vec(-50.0f64..50.0, 2),
    ) {
        for act in [Activation::Relu, Activation::Tanh, Activation::Identity] {
            let p = DrnParams::from_vec(&theta, 2, 3, act).unwrap();
            prop_assert!(drn_predict(&p, &x).unwrap().sigma() > 0.0);
        }
    }

    #[test]
    fn drn_without_active_units_is_flat_emos(
        a in -5.0f64..5.0,
        a_scale in -5.0f64..5.0,
        head in prop::collection::vec(-5.0f64..5.0, 2 * 3),
        x in prop::collection::vec(0.0f64..5.0, 3),
    ) {
        let mut flat = EmosParams::zeros(3);
        flat.alpha = a;
        flat.alpha_scale = a_scale;
        let e = emos_predict(&flat, &x).unwrap();
        let empty = DrnParams::from_vec(&[a, a_scale], 3, 0, Activation::Relu).unwrap();
        prop_assert_eq!(e, drn_predict(&empty, &x).unwrap());
        // Two relu units with negative pre-activations for nonnegative x.
        let mut dead = DrnParams::zeros(3, 2, Activation::Relu);
        dead.alpha = a;
        dead.alpha_scale = a_scale;
        dead.beta = head[..2].to_vec();
        dead.beta_scale = head[2..4].to_vec();
        dead.gamma = vec![-1.0, -0.5];
        dead.delta = vec![-head[4].abs(); 6];
        prop_assert_eq!(e, drn_predict(&dead, &x).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn forests_are_reproducible(data in dataset(5..=30, 1..=3), seed in any::<u64>()) {
        let cfg = DrfConfig { num_trees: 6, seed, ..DrfConfig::default() };
        let a = drf_fit(&data, &cfg).unwrap();
        let b = drf_fit(&data, &cfg).unwrap();
        prop_assert_eq!(&a.trees, &b.trees);
        let x = data.row(0);
        prop_assert_eq!(drf_predict(&a, x).unwrap(), drf_predict(&b, x).unwrap());
    }
}
