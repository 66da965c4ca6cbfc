//! Predictive models: parametric (EMOS, DRN) and nonparametric (KNN, DRF).

mod drf;
mod drn;
mod emos;
mod knn;
mod param_box;

pub use drf::{drf_fit, drf_predict, drf_weights, DrfConfig, DrfModel, Node, Tree};
pub use drn::{drn_grad, drn_predict, Activation, DrnParams};
pub use emos::{emos_grad, emos_predict, EmosParams};
pub use knn::{knn_predict, KnnModel};
pub use param_box::ParamBox;

use serde::{Deserialize, Serialize};

use crate::distributions::{MixtureSpec, PredictiveDistribution};
use crate::error::{input, Result};

/// Lower clamp applied to the softplus argument of the scale link.
pub const SOFTPLUS_FLOOR: f64 = -30.0;

/// `log(1 + e^u)` without overflow.
pub fn softplus(u: f64) -> f64 {
    if u > 0.0 {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}

/// Inverse of [`softplus`] for `v > 0`.
pub fn softplus_inv(v: f64) -> f64 {
    if v > 30.0 {
        v + (-(-v).exp()).ln_1p()
    } else {
        v.exp_m1().ln()
    }
}

pub fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// Scale link `sqrt(softplus(u))`, with `u` clamped below at [`SOFTPLUS_FLOOR`].
/// Returns the scale and whether the clamp was active.
pub fn scale_link(u: f64) -> (f64, bool) {
    if u < SOFTPLUS_FLOOR {
        (softplus(SOFTPLUS_FLOOR).sqrt(), true)
    } else {
        (softplus(u).sqrt(), false)
    }
}

/// Anything that maps a covariate vector to a predictive distribution.
pub trait Forecaster: Send + Sync {
    fn predict(&self, x: &[f64]) -> Result<PredictiveDistribution>;

    /// Expected covariate dimension, if the model constrains it.
    fn input_dim(&self) -> Option<usize>;
}

/// A fitted model of any family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum FittedModel {
    Emos(EmosParams),
    Drn(DrnParams),
    Knn(KnnModel),
    Drf(DrfModel),
    /// Same prediction for every covariate vector.
    Fixed(PredictiveDistribution),
    /// Convex combination of member predictions.
    Mixture { weights: Vec<f64>, members: Vec<FittedModel> },
}

impl FittedModel {
    pub fn family(&self) -> &'static str {
        match self {
            FittedModel::Emos(_) => "emos",
            FittedModel::Drn(_) => "drn",
            FittedModel::Knn(_) => "knn",
            FittedModel::Drf(_) => "drf",
            FittedModel::Fixed(_) => "fixed",
            FittedModel::Mixture { .. } => "mixture",
        }
    }
}

pub(crate) fn check_dim(x: &[f64], d: usize) -> Result<()> {
    if x.len() != d {
        return input(format!("covariate vector has length {}, model expects {}", x.len(), d));
    }
    Ok(())
}

impl Forecaster for FittedModel {
    fn predict(&self, x: &[f64]) -> Result<PredictiveDistribution> {
        Ok(match self {
            FittedModel::Emos(p) => emos_predict(p, x)?.into(),
            FittedModel::Drn(p) => drn_predict(p, x)?.into(),
            FittedModel::Knn(m) => knn_predict(m, x)?.into(),
            FittedModel::Drf(m) => drf_predict(m, x)?.into(),
            FittedModel::Fixed(f) => f.clone(),
            FittedModel::Mixture { weights, members } => {
                let components = members
                    .iter()
                    .map(|m| m.predict(x))
                    .collect::<Result<Vec<_>>>()?;
                PredictiveDistribution::Mixture(MixtureSpec::new(components, weights.clone())?)
            }
        })
    }

    fn input_dim(&self) -> Option<usize> {
        match self {
            FittedModel::Emos(p) => Some(p.dim()),
            FittedModel::Drn(p) => Some(p.dim()),
            FittedModel::Knn(m) => Some(m.dim()),
            FittedModel::Drf(m) => Some(m.dim()),
            FittedModel::Fixed(_) => None,
            FittedModel::Mixture { members, .. } => members.iter().find_map(|m| m.input_dim()),
        }
    }
}

/// Sub-Gaussian proxy for nonparametric predictions: the largest absolute response.
pub fn subgauss_proxy(train_y: &[f64]) -> Result<f64> {
    if train_y.is_empty() {
        return input("empty response vector");
    }
    Ok(train_y.iter().fold(0.0_f64, |a, y| a.max(y.abs())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn softplus_is_stable() {
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(softplus(1000.0), 1000.0);
        assert!(softplus(-800.0) >= 0.0);
        for u in [-20.0, -1.0, 0.3, 5.0, 40.0] {
            assert!((softplus_inv(softplus(u)) - u).abs() < 1e-9 * (1.0 + u.abs()));
        }
    }

    #[test]
    fn subgauss_proxy_examples() {
        assert_eq!(subgauss_proxy(&[-3.0, 1.0, 2.0]).unwrap(), 3.0);
        assert_eq!(subgauss_proxy(&[0.0; 4]).unwrap(), 0.0);
        assert!(subgauss_proxy(&[]).is_err());
    }

    #[test]
    fn subgauss_proxy_of_normal_sample() {
        let mean = (0..200)
            .map(|s| {
                let mut r = rng::stream(s, &[]);
                let y: Vec<f64> = (0..1000).map(|_| StandardNormal.sample(&mut r)).collect();
                subgauss_proxy(&y).unwrap()
            })
            .sum::<f64>()
            / 200.0;
        assert!((mean - (2.0 * 1000f64.ln()).sqrt()).abs() < 0.5, "{mean}");
    }
}
