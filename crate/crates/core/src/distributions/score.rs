use super::mixture::{flatten_exact, flatten_mixture, DiscretizationConfig};
use super::normal::{self, FRAC_1_SQRT_PI};
use super::quadrature::{integrate_pieces, QuadratureConfig};
use super::{GaussianLS, PredictiveDistribution, WeightedEmpirical};
use crate::error::{input, Result};
use std::f64::consts::FRAC_2_PI;

/// CRPS by numerical integration of `(1{y <= z} - F(z))^2`.
///
/// This is the reference the closed forms are checked against.
pub fn crps_integral(f: &PredictiveDistribution, y: f64, quad: &QuadratureConfig) -> Result<f64> {
    if !y.is_finite() {
        return input(format!("observation must be finite, got {y}"));
    }
    let mut breaks = Vec::new();
    f.push_breakpoints(quad.tail_sigmas, &mut breaks);
    breaks.push(y);
    let breaks = sorted_unique(breaks);
    let v = integrate_pieces(&breaks, f.has_continuous_part(), quad, |z| {
        let step = if y <= z { 1.0 } else { 0.0 };
        let d = step - f.cdf(z);
        d * d
    })?;
    Ok(v.max(0.0))
}

/// Closed-form CRPS of a weighted empirical distribution.
///
/// Uses `sum_i w_i |y_i - y| - sum_{i<j} w_i w_j (y_(j) - y_(i))` with the pair
/// term accumulated through running weight and weighted-value sums over the
/// sorted atoms, so the cost is linear in the number of atoms.
pub fn crps_empirical(f: &WeightedEmpirical, y: f64) -> f64 {
    let mut abs_term = 0.0;
    let mut pair_term = 0.0;
    let mut cum_w = 0.0;
    let mut cum_wd = 0.0;
    for (&a, &w) in f.atoms().iter().zip(f.weights()) {
        // Shift by y: translation-invariant, keeps magnitudes small.
        let d = a - y;
        abs_term += w * d.abs();
        pair_term += w * (d * cum_w - cum_wd);
        cum_w += w;
        cum_wd += w * d;
    }
    (abs_term - pair_term).max(0.0)
}

/// Closed-form CRPS of `N(m, sigma^2)`.
pub fn crps_gaussian(g: &GaussianLS, y: f64) -> f64 {
    let z = (y - g.m()) / g.sigma();
    g.sigma() * (z * (2.0 * normal::cdf(z) - 1.0) + 2.0 * normal::pdf(z) - FRAC_1_SQRT_PI)
}

/// Partial derivatives of [`crps_gaussian`] with respect to location and scale.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianGrad {
    pub d_m: f64,
    pub d_sigma: f64,
}

pub fn crps_gaussian_grad(g: &GaussianLS, y: f64) -> GaussianGrad {
    let z = (y - g.m()) / g.sigma();
    GaussianGrad {
        d_m: 1.0 - 2.0 * normal::cdf(z),
        d_sigma: 2.0 * normal::pdf(z) - FRAC_1_SQRT_PI,
    }
}

/// CRPS of any predictive distribution using the closed forms.
///
/// Mixtures of purely discrete components are flattened exactly; mixtures
/// with Gaussian parts are discretized with the default quantile grid.
pub fn crps(f: &PredictiveDistribution, y: f64) -> f64 {
    crps_with(f, y, &DiscretizationConfig::default())
}

pub fn crps_with(f: &PredictiveDistribution, y: f64, disc: &DiscretizationConfig) -> f64 {
    match f {
        PredictiveDistribution::Empirical(e) => crps_empirical(e, y),
        PredictiveDistribution::Gaussian(g) => crps_gaussian(g, y),
        PredictiveDistribution::Mixture(m) => {
            let flat = if f.has_continuous_part() {
                flatten_mixture(m, disc).expect("discretization config was validated")
            } else {
                flatten_exact(m)
            };
            crps_empirical(&flat, y)
        }
    }
}

/// Wasserstein-1 distance, the L1 distance between cdfs.
///
/// Exact when neither argument has a Gaussian part.
pub fn w1_distance(f: &PredictiveDistribution, g: &PredictiveDistribution) -> Result<f64> {
    cdf_functional(f, g, |a, b| (a - b).abs())
}

/// `int (F(z) - G(z))^2 dz`, the excess expected CRPS of forecasting F when G is true.
pub fn cdf_l2_divergence(f: &PredictiveDistribution, g: &PredictiveDistribution) -> Result<f64> {
    if let (PredictiveDistribution::Gaussian(a), PredictiveDistribution::Gaussian(b)) = (f, g) {
        return Ok(gaussian_divergence(a, b));
    }
    cdf_functional(f, g, |a, b| (a - b) * (a - b))
}

// E|X - Y| - (sigma_f + sigma_g)/sqrt(pi) for independent X ~ F, Y ~ G.
fn gaussian_divergence(f: &GaussianLS, g: &GaussianLS) -> f64 {
    let s = (f.sigma() * f.sigma() + g.sigma() * g.sigma()).sqrt();
    let cross = folded_normal_mean(f.m() - g.m(), s);
    (cross - (f.sigma() + g.sigma()) * FRAC_1_SQRT_PI).max(0.0)
}

fn cdf_functional<H>(f: &PredictiveDistribution, g: &PredictiveDistribution, h: H) -> Result<f64>
where
    H: Fn(f64, f64) -> f64,
{
    let quad = QuadratureConfig::default();
    let mut breaks = Vec::new();
    f.push_breakpoints(quad.tail_sigmas, &mut breaks);
    g.push_breakpoints(quad.tail_sigmas, &mut breaks);
    let breaks = sorted_unique(breaks);
    let smooth = f.has_continuous_part() || g.has_continuous_part();
    let v = integrate_pieces(&breaks, smooth, &quad, |z| h(f.cdf(z), g.cdf(z)))?;
    Ok(v.max(0.0))
}

/// First absolute moment `int |y| F(dy)`.
pub fn first_abs_moment(f: &PredictiveDistribution) -> f64 {
    match f {
        PredictiveDistribution::Empirical(e) => {
            e.atoms().iter().zip(e.weights()).map(|(a, w)| w * a.abs()).sum()
        }
        PredictiveDistribution::Gaussian(g) => folded_normal_mean(g.m(), g.sigma()),
        PredictiveDistribution::Mixture(m) => m
            .components()
            .iter()
            .zip(m.weights())
            .map(|(c, w)| w * first_abs_moment(c))
            .sum(),
    }
}

/// `E|Z|` for `Z ~ N(mu, s^2)`.
pub(crate) fn folded_normal_mean(mu: f64, s: f64) -> f64 {
    let r = mu / s;
    s * FRAC_2_PI.sqrt() * (-0.5 * r * r).exp() + mu * (1.0 - 2.0 * normal::cdf(-r))
}

fn sorted_unique(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}
