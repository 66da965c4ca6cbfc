//! Synthetic heteroscedastic Gaussian truths with closed-form conditional laws.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::distributions::{GaussianLS, PredictiveDistribution, WeightedEmpirical};
use crate::error::{Error, Result};
use crate::models::{emos_predict, EmosParams};
use crate::pipeline::Dataset;
use crate::rng::StreamRng;

/// Conditional law of `Y` given `X = x`, with `X` uniform on `[0, 1]^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case")]
pub enum SyntheticGenerator {
    /// Exactly an EMOS model, so the parametric family contains the truth.
    LinearEmos { params: EmosParams },
    /// `m(x) = sin(2 pi x_0)`, `sigma(x) = sigma0 + sigma1 * x_0`.
    Sine { d: usize, sigma0: f64, sigma1: f64 },
    /// `N(c, sigma0)` regardless of `x`; a point mass when `sigma0 = 0`.
    Constant { d: usize, c: f64, sigma0: f64 },
}

impl SyntheticGenerator {
    /// `m(x) = 1 + 2 x`, `sigma(x)^2 = softplus(x)` on `d = 1`.
    pub fn linear_emos() -> Self {
        SyntheticGenerator::LinearEmos {
            params: EmosParams {
                alpha: 1.0,
                beta: vec![2.0],
                alpha_scale: 0.0,
                beta_scale: vec![1.0],
            },
        }
    }

    pub fn sine() -> Self {
        SyntheticGenerator::Sine {
            d: 1,
            sigma0: 0.1,
            sigma1: 0.2,
        }
    }

    pub fn constant(c: f64, sigma0: f64) -> Self {
        SyntheticGenerator::Constant { d: 1, c, sigma0 }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "linear-emos" | "linear" => Ok(Self::linear_emos()),
            "sine" | "sine-drn" => Ok(Self::sine()),
            "constant" => Ok(Self::constant(0.0, 1.0)),
            other => Err(Error::Config(format!("unknown synthetic preset `{other}`"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            SyntheticGenerator::LinearEmos { params } => params.to_vec().iter().all(|v| v.is_finite()),
            SyntheticGenerator::Sine { d, sigma0, sigma1 } => {
                *d >= 1 && *sigma0 > 0.0 && *sigma1 >= 0.0 && sigma1.is_finite()
            }
            SyntheticGenerator::Constant { c, sigma0, .. } => c.is_finite() && *sigma0 >= 0.0 && sigma0.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid synthetic generator {self:?}")))
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            SyntheticGenerator::LinearEmos { params } => params.dim(),
            SyntheticGenerator::Sine { d, .. } | SyntheticGenerator::Constant { d, .. } => *d,
        }
    }

    fn location_scale(&self, x: &[f64]) -> (f64, f64) {
        match self {
            SyntheticGenerator::LinearEmos { params } => {
                let g = emos_predict(params, x).expect("dimension checked by caller");
                (g.m(), g.sigma())
            }
            SyntheticGenerator::Sine { sigma0, sigma1, .. } => {
                ((2.0 * PI * x[0]).sin(), sigma0 + sigma1 * x[0])
            }
            SyntheticGenerator::Constant { c, sigma0, .. } => (*c, *sigma0),
        }
    }

    /// The true conditional distribution at `x`.
    pub fn dist(&self, x: &[f64]) -> Result<PredictiveDistribution> {
        if x.len() != self.dim() {
            return Err(Error::Input(format!(
                "covariate vector has length {}, generator expects {}",
                x.len(),
                self.dim()
            )));
        }
        let (m, s) = self.location_scale(x);
        Ok(if s == 0.0 {
            WeightedEmpirical::dirac(m)?.into()
        } else {
            GaussianLS::new(m, s)?.into()
        })
    }

    pub fn sample_x(&self, rng: &mut StreamRng) -> Vec<f64> {
        (0..self.dim()).map(|_| rng.random::<f64>()).collect()
    }

    pub fn sample_y(&self, x: &[f64], rng: &mut StreamRng) -> f64 {
        let (m, s) = self.location_scale(x);
        let e: f64 = rng.sample(StandardNormal);
        m + s * e
    }

    /// `n` independent draws of `(X, Y)`.
    pub fn sample(&self, n: usize, rng: &mut StreamRng) -> Dataset {
        let d = self.dim();
        let mut x = Vec::with_capacity(n * d);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let xi = self.sample_x(rng);
            y.push(self.sample_y(&xi, rng));
            x.extend(xi);
        }
        Dataset::from_flat(x, y, d).expect("generator output is finite")
    }

    /// Sub-Gaussian parameter for `|Y|`: a bounded mean `|m| <= A` contributes
    /// `A`, the noise `sigma * eps` contributes `s_max`, and the two add.
    pub fn beta_y(&self) -> f64 {
        let (m_abs, s_max) = match self {
            SyntheticGenerator::LinearEmos { params } => {
                let (lo, hi) = linear_range(params.alpha, &params.beta);
                let (_, u_hi) = linear_range(params.alpha_scale, &params.beta_scale);
                (lo.abs().max(hi.abs()), crate::models::softplus(u_hi).sqrt())
            }
            SyntheticGenerator::Sine { sigma0, sigma1, .. } => (1.0, sigma0 + sigma1.max(0.0)),
            SyntheticGenerator::Constant { c, sigma0, .. } => (c.abs(), *sigma0),
        };
        m_abs + s_max
    }
}

/// Range of `a + b.x` over `x` in `[0, 1]^d`.
pub(crate) fn linear_range(a: f64, b: &[f64]) -> (f64, f64) {
    let lo = a + b.iter().map(|v| v.min(0.0)).sum::<f64>();
    let hi = a + b.iter().map(|v| v.max(0.0)).sum::<f64>();
    (lo, hi)
}
