//! Concentration bounds for estimation error and regret, and a Monte-Carlo
//! harness that measures how often they hold on synthetic problems.

mod coverage;
mod synthetic;

pub use coverage::{
    coverage_experiment, log_log_slope, CoverageConfig, CoverageReport, EstimationOracle,
    EstimationPreset, Scenario,
};
pub use synthetic::SyntheticGenerator;

use serde::{Deserialize, Serialize};

use crate::error::{input, Result};

/// Inputs shared by the bound calculators. Fields a given bound does not use
/// are ignored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundInputs {
    /// Training sample size.
    pub n: f64,
    /// Validation sample size.
    #[serde(rename = "N", alias = "big_n")]
    pub big_n: f64,
    /// Parameter dimension.
    #[serde(rename = "K", alias = "k")]
    pub k: f64,
    /// Number of candidates.
    #[serde(rename = "M", alias = "m")]
    pub m: f64,
    pub delta: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub beta_n: f64,
    /// Lipschitz constant of the parametrization in Wasserstein-1.
    #[serde(rename = "L", alias = "lipschitz")]
    pub lipschitz: f64,
    /// Radius of a ball around the origin containing the parameter set.
    #[serde(rename = "R", alias = "radius")]
    pub radius: f64,
    /// Moment order.
    pub p: f64,
    /// Moment bound on `|Y|^p`.
    #[serde(rename = "D", alias = "d_moment")]
    pub d_moment: f64,
    /// Data-dependent moment bound for the candidates.
    #[serde(rename = "D_n", alias = "d_moment_n")]
    pub d_moment_n: f64,
    /// Largest first absolute moment among the candidates.
    pub max_m1: f64,
    /// Rosenthal-type constant `c'(p)`.
    pub c_prime: f64,
    /// Unspecified multiplicative constant of the rate-only bounds.
    #[serde(rename = "C", alias = "constant")]
    pub constant: f64,
}

impl Default for BoundInputs {
    fn default() -> Self {
        BoundInputs {
            n: 1.0,
            big_n: 1.0,
            k: 1.0,
            m: 1.0,
            delta: 0.1,
            beta1: 1.0,
            beta2: 1.0,
            beta_n: 1.0,
            lipschitz: 0.0,
            radius: 0.0,
            p: 2.0,
            d_moment: 1.0,
            d_moment_n: 1.0,
            max_m1: 1.0,
            c_prime: 1.0,
            constant: 1.0,
        }
    }
}

/// A bound together with whether its sample-size condition holds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundValue {
    pub value: f64,
    pub valid: bool,
    pub condition: String,
}

impl BoundValue {
    fn unconditional(value: f64) -> Self {
        BoundValue {
            value,
            valid: true,
            condition: "none".into(),
        }
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return input(format!("delta = {delta} must lie in (0, 1)"));
    }
    Ok(())
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return input(format!("{name} = {v} must be positive"));
    }
    Ok(())
}

fn check_at_least_one(name: &str, v: f64) -> Result<()> {
    if !(v >= 1.0 && v.is_finite()) {
        return input(format!("{name} = {v} must be at least 1"));
    }
    Ok(())
}

/// `64 (beta1^2 + beta2^2)`.
pub fn c_beta(b: &BoundInputs) -> f64 {
    64.0 * (b.beta1 * b.beta1 + b.beta2 * b.beta2)
}

/// `beta1^2 + beta_n^2`.
pub fn c_n(b: &BoundInputs) -> f64 {
    b.beta1 * b.beta1 + b.beta_n * b.beta_n
}

/// `log(2 n^K / delta)` without forming `n^K`.
fn log_term(n: f64, k: f64, delta: f64) -> f64 {
    std::f64::consts::LN_2 + k * n.ln() - delta.ln()
}

fn estimation_checks(b: &BoundInputs) -> Result<()> {
    check_at_least_one("n", b.n)?;
    check_at_least_one("K", b.k)?;
    check_positive("c_beta", c_beta(b))?;
    if b.lipschitz < 0.0 || b.radius < 0.0 {
        return input("L and R must be nonnegative");
    }
    Ok(())
}

/// High-probability estimation error bound
/// `sqrt(c_beta log(2 n^K / delta) / n)`, valid once
/// `n log(2 n^K / delta) >= (48 L R)^2 / c_beta`.
pub fn bound_estimation(b: &BoundInputs) -> Result<BoundValue> {
    check_delta(b.delta)?;
    estimation_checks(b)?;
    let c = c_beta(b);
    let l = log_term(b.n, b.k, b.delta);
    let need = (48.0 * b.lipschitz * b.radius).powi(2) / c;
    Ok(BoundValue {
        value: (c * l / b.n).sqrt(),
        valid: b.n * l >= need,
        condition: format!("n log(2 n^K / delta) = {:.6} >= (48 L R)^2 / c_beta = {:.6}", b.n * l, need),
    })
}

/// Expected estimation error bound `2 sqrt(c_beta log(2 n^K) / n)`.
pub fn bound_estimation_expect(b: &BoundInputs) -> Result<BoundValue> {
    estimation_checks(b)?;
    let c = c_beta(b);
    let l = log_term(b.n, b.k, 1.0);
    let need = (48.0 * b.lipschitz * b.radius).powi(2) / c;
    Ok(BoundValue {
        value: 2.0 * (c * l / b.n).sqrt(),
        valid: b.n * l >= need,
        condition: format!("n log(2 n^K) = {:.6} >= (48 L R)^2 / c_beta = {:.6}", b.n * l, need),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegretBound {
    pub high_probability: BoundValue,
    pub expectation: BoundValue,
    pub c_n: f64,
}

fn regret_checks(b: &BoundInputs) -> Result<()> {
    check_delta(b.delta)?;
    check_at_least_one("N", b.big_n)?;
    check_at_least_one("M", b.m)?;
    check_positive("c_n", c_n(b))
}

/// Model selection regret: `4 sqrt(c_n log(2M / delta) / N)` with probability
/// `1 - delta`, and `8 sqrt(c_n log(2M) / N)` in expectation.
pub fn bound_selection_regret(b: &BoundInputs) -> Result<RegretBound> {
    regret_checks(b)?;
    let c = c_n(b);
    let hp = 4.0 * (c * ((2.0 * b.m).ln() - b.delta.ln()) / b.big_n).sqrt();
    let ex = 8.0 * (c * (2.0 * b.m).ln() / b.big_n).sqrt();
    Ok(RegretBound {
        high_probability: BoundValue::unconditional(hp),
        expectation: BoundValue::unconditional(ex),
        c_n: c,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregationBound {
    pub high_probability: BoundValue,
    pub expectation: BoundValue,
    pub c_n: f64,
    /// Lipschitz constant of `lambda -> F^lambda` in the Euclidean norm,
    /// `sqrt(M) max m1`.
    pub lipschitz_sqrt_m: f64,
    /// Lipschitz constant with respect to the l1 norm on the simplex, `max m1`.
    pub lipschitz_l1: f64,
    /// Sample-size condition with the Euclidean constant and radius 1 made explicit.
    pub valid_with_lipschitz: bool,
}

/// Convex aggregation regret: `8 sqrt(c_n log(2 N^M / delta) / N)` with
/// probability `1 - delta` once `N log(2 N^M / delta) >= 48^2 / c_n`, and
/// `2 sqrt(c_n log(2 N^M) / N)` in expectation under `N log(2 N^M) >= 48^2 / c_n`.
pub fn bound_aggregation_regret(b: &BoundInputs) -> Result<AggregationBound> {
    regret_checks(b)?;
    let c = c_n(b);
    let l = log_term(b.big_n, b.m, b.delta);
    let l1 = log_term(b.big_n, b.m, 1.0);
    let need = 48.0 * 48.0 / c;
    let lip = b.m.sqrt() * b.max_m1;
    Ok(AggregationBound {
        high_probability: BoundValue {
            value: 8.0 * (c * l / b.big_n).sqrt(),
            valid: b.big_n * l >= need,
            condition: format!("N log(2 N^M / delta) = {:.6} >= 48^2 / c_n = {:.6}", b.big_n * l, need),
        },
        expectation: BoundValue {
            value: 2.0 * (c * l1 / b.big_n).sqrt(),
            valid: b.big_n * l1 >= need,
            condition: format!("N log(2 N^M) = {:.6} >= 48^2 / c_n = {:.6}", b.big_n * l1, need),
        },
        c_n: c,
        lipschitz_sqrt_m: lip,
        lipschitz_l1: b.max_m1,
        valid_with_lipschitz: b.big_n * l >= (48.0 * lip).powi(2) / c,
    })
}

/// Exponent `p / (2 (p + K))` of the moment-only estimation rate `C n^{-p/(2(p+K))}`.
pub fn rate_exponent_heavy_tail(p: f64, k: f64) -> Result<f64> {
    if !(p >= 2.0) {
        return input(format!("p = {p} must be at least 2"));
    }
    if !(k >= 0.0) {
        return input(format!("K = {k} must be nonnegative"));
    }
    if p.is_infinite() {
        return Ok(0.5);
    }
    Ok(p / (2.0 * (p + k)))
}

/// `C n^{-p/(2(p+K))}` with a user-supplied constant.
pub fn bound_estimation_moment(b: &BoundInputs) -> Result<BoundValue> {
    check_at_least_one("n", b.n)?;
    let e = rate_exponent_heavy_tail(b.p, b.k)?;
    Ok(BoundValue {
        value: b.constant * b.n.powf(-e),
        valid: true,
        condition: "constant C is user supplied".into(),
    })
}

/// Moment-only selection regret in expectation:
/// `2 (c'(p) max(D, D_n) M)^{1/p} N^{-1/2}`.
pub fn bound_selection_moment(b: &BoundInputs) -> Result<BoundValue> {
    check_at_least_one("N", b.big_n)?;
    check_at_least_one("M", b.m)?;
    rate_exponent_heavy_tail(b.p, 0.0)?;
    let d = b.d_moment.max(b.d_moment_n);
    Ok(BoundValue {
        value: 2.0 * (b.c_prime * d * b.m).powf(1.0 / b.p) / b.big_n.sqrt(),
        valid: true,
        condition: "constant c'(p) is user supplied".into(),
    })
}

/// Moment-only aggregation regret in expectation:
/// `C (L^K max(D, D_n) N^{-p/2})^{1/(p+K)}` with `L = sqrt(M) max m1` and `K = M`.
pub fn bound_aggregation_moment(b: &BoundInputs) -> Result<BoundValue> {
    check_at_least_one("N", b.big_n)?;
    check_at_least_one("M", b.m)?;
    rate_exponent_heavy_tail(b.p, b.m)?;
    let k = b.m;
    let lip = b.m.sqrt() * b.max_m1;
    let d = b.d_moment.max(b.d_moment_n);
    let inner = lip.powf(k) * d * b.big_n.powf(-b.p / 2.0);
    Ok(BoundValue {
        value: b.constant * inner.powf(1.0 / (b.p + k)),
        valid: true,
        condition: "constant C is user supplied".into(),
    })
}

/// Exponent of `N` in [`bound_aggregation_moment`]: `p / (2 (p + M))`.
pub fn rate_exponent_aggregation_moment(p: f64, m: f64) -> Result<f64> {
    rate_exponent_heavy_tail(p, m)
}
