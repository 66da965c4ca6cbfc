use serde::{Deserialize, Serialize};

use super::{check_dim, scale_link, sigmoid};
use crate::distributions::{crps_gaussian_grad, GaussianLS};
use crate::error::{input, Result};

/// Gaussian model with linear mean `alpha + beta.x` and scale
/// `sqrt(softplus(alpha_scale + beta_scale.x))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmosParams {
    pub alpha: f64,
    pub beta: Vec<f64>,
    pub alpha_scale: f64,
    pub beta_scale: Vec<f64>,
}

impl EmosParams {
    pub fn zeros(d: usize) -> Self {
        EmosParams {
            alpha: 0.0,
            beta: vec![0.0; d],
            alpha_scale: 0.0,
            beta_scale: vec![0.0; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.beta.len()
    }

    /// Number of free parameters, `2(1 + d)`.
    pub fn num_params(&self) -> usize {
        2 * (1 + self.dim())
    }

    /// Flat layout `[alpha, beta.., alpha_scale, beta_scale..]`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.num_params());
        v.push(self.alpha);
        v.extend_from_slice(&self.beta);
        v.push(self.alpha_scale);
        v.extend_from_slice(&self.beta_scale);
        v
    }

    pub fn from_vec(theta: &[f64], d: usize) -> Result<Self> {
        if theta.len() != 2 * (1 + d) {
            return input(format!("EMOS with d={d} needs {} parameters", 2 * (1 + d)));
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return input("non-finite EMOS parameter");
        }
        Ok(EmosParams {
            alpha: theta[0],
            beta: theta[1..=d].to_vec(),
            alpha_scale: theta[d + 1],
            beta_scale: theta[d + 2..].to_vec(),
        })
    }

    pub(crate) fn linear_parts(&self, x: &[f64]) -> (f64, f64) {
        let m = self.alpha + dot(&self.beta, x);
        let u = self.alpha_scale + dot(&self.beta_scale, x);
        (m, u)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| a * b).sum()
}

pub fn emos_predict(p: &EmosParams, x: &[f64]) -> Result<GaussianLS> {
    check_dim(x, p.dim())?;
    let (m, u) = p.linear_parts(x);
    GaussianLS::new(m, scale_link(u).0)
}

/// Gradient of `crps(emos_predict(p, x), y)` in the flat layout, plus whether
/// the scale clamp was active (its scale derivatives are then zero).
pub fn emos_grad(p: &EmosParams, x: &[f64], y: f64) -> Result<(Vec<f64>, bool)> {
    check_dim(x, p.dim())?;
    let (m, u) = p.linear_parts(x);
    let (sigma, clamped) = scale_link(u);
    let g = crps_gaussian_grad(&GaussianLS::new(m, sigma)?, y);
    let d_u = if clamped { 0.0 } else { g.d_sigma * sigmoid(u) / (2.0 * sigma) };
    let mut out = Vec::with_capacity(p.num_params());
    out.push(g.d_m);
    out.extend(x.iter().map(|xi| g.d_m * xi));
    out.push(d_u);
    out.extend(x.iter().map(|xi| d_u * xi));
    Ok((out, clamped))
}
