mod common;

use common::*;
use proptest::prelude::*;

fn cases(n: u32) -> ProptestConfig {
    ProptestConfig::with_cases(n)
}

proptest! {
    #![proptest_config(cases(500))]

    #[test]
    fn forecasting_the_truth_minimizes_mean_score(case in propriety_strategy()) {
        propriety(case)?;
    }

    #[test]
    fn score_bounded_by_observation_and_first_moment(case in (any_distribution(), -30.0f64..30.0)) {
        upper_bound(case)?;
    }

    #[test]
    fn score_is_two_lipschitz_in_w1(case in lipschitz_strategy()) {
        lipschitz(case)?;
    }

    #[test]
    fn mixture_weights_are_lipschitz_in_l1(case in mixture_strategy()) {
        mixture_lipschitz(case)?;
    }

    #[test]
    fn location_scale_w1_bound(case in location_scale_strategy()) {
        location_scale(case)?;
    }

    #[test]
    fn gaussian_gradient_matches_finite_differences(case in gaussian_gradient_strategy()) {
        gaussian_gradient(case)?;
    }
}

proptest! {
    #![proptest_config(cases(1000))]

    #[test]
    fn empirical_closed_form_matches_integral(case in (empirical(20, 50.0), -60.0f64..60.0)) {
        oracle_empirical(case)?;
    }

    #[test]
    fn gaussian_closed_form_matches_integral(case in (gaussian(), -6.0f64..6.0)) {
        oracle_gaussian(case)?;
    }
}
