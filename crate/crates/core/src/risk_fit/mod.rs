//! Empirical and theoretical CRPS risk, and risk minimization for the
//! parametric families.

mod fit;
mod optim;

pub use fit::{fit_drn, fit_emos, FitResult, ModelParams};
pub use optim::{nelder_mead, GradientConfig, Method, Minimum, NelderMeadConfig, OptimizerConfig};

use serde::{Deserialize, Serialize};

use crate::bounds::SyntheticGenerator;
use crate::distributions::{cdf_l2_divergence, crps};
use crate::error::{input, Result};
use crate::models::Forecaster;
use crate::pipeline::Dataset;
use crate::rng;

/// Mean score over a sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskEstimate {
    pub value: f64,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub scores: Option<Vec<f64>>,
    pub stderr: f64,
}

impl RiskEstimate {
    pub fn from_scores(scores: Vec<f64>) -> Self {
        let n = scores.len();
        let value = scores.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let var = scores.iter().map(|s| (s - value).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            f64::NAN
        };
        RiskEstimate {
            value,
            n,
            scores: Some(scores),
            stderr,
        }
    }

    pub fn without_scores(mut self) -> Self {
        self.scores = None;
        self
    }
}

fn check_sample(model: &dyn Forecaster, sample: &Dataset) -> Result<()> {
    if sample.is_empty() {
        return input("empty sample");
    }
    if let Some(d) = model.input_dim() {
        if d != sample.d() {
            return input(format!("model expects {d} covariates, sample has {}", sample.d()));
        }
    }
    Ok(())
}

/// Per-point CRPS of `model` on `sample`.
pub fn scores(model: &dyn Forecaster, sample: &Dataset) -> Result<Vec<f64>> {
    check_sample(model, sample)?;
    sample
        .rows()
        .zip(sample.y())
        .map(|(x, y)| Ok(crps(&model.predict(x)?, *y)))
        .collect()
}

pub fn empirical_risk(model: &dyn Forecaster, sample: &Dataset) -> Result<RiskEstimate> {
    Ok(RiskEstimate::from_scores(scores(model, sample)?))
}

const MC_STREAM: u64 = 0x3C;

/// Fresh `(X, Y)` draws for Monte-Carlo risk estimates.
pub fn mc_sample(truth: &SyntheticGenerator, n_mc: usize, seed: u64) -> Dataset {
    truth.sample(n_mc, &mut rng::stream(seed, &[MC_STREAM]))
}

/// Monte-Carlo estimate of the expected score under the synthetic truth.
pub fn theoretical_risk_mc(
    model: &dyn Forecaster,
    truth: &SyntheticGenerator,
    n_mc: usize,
    seed: u64,
) -> Result<RiskEstimate> {
    if n_mc < 2 {
        return input("n_mc must be at least 2");
    }
    truth.validate()?;
    empirical_risk(model, &mc_sample(truth, n_mc, seed))
}

/// `E_X int (F_X - F*_X)^2`, averaged over `x_mc` draws of `X`.
pub fn excess_risk_exact(
    model: &dyn Forecaster,
    truth: &SyntheticGenerator,
    x_mc: usize,
    seed: u64,
) -> Result<f64> {
    if x_mc == 0 {
        return input("x_mc must be positive");
    }
    truth.validate()?;
    let mut r = rng::stream(seed, &[MC_STREAM, 1]);
    let mut total = 0.0;
    for _ in 0..x_mc {
        let x = truth.sample_x(&mut r);
        total += cdf_l2_divergence(&model.predict(&x)?, &truth.dist(&x)?)?;
    }
    Ok(total / x_mc as f64)
}
