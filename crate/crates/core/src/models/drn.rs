use serde::{Deserialize, Serialize};

use super::emos::dot;
use super::{check_dim, scale_link, sigmoid};
use crate::distributions::{crps_gaussian_grad, GaussianLS};
use crate::error::{input, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative, with the relu kink assigned slope 0.
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - z.tanh().powi(2),
            Activation::Identity => 1.0,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "relu" => Some(Activation::Relu),
            "tanh" => Some(Activation::Tanh),
            "identity" | "linear" => Some(Activation::Identity),
            _ => None,
        }
    }
}

/// One-hidden-layer network with a Gaussian output head: hidden features
/// `h = g(gamma + delta x)` feed both `m = alpha + beta.h` and
/// `sigma^2 = softplus(alpha_scale + beta_scale.h)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DrnParams {
    pub activation: Activation,
    pub alpha: f64,
    pub beta: Vec<f64>,
    pub alpha_scale: f64,
    pub beta_scale: Vec<f64>,
    pub gamma: Vec<f64>,
    /// Row-major `H x d`.
    pub delta: Vec<f64>,
    d: usize,
}

impl DrnParams {
    pub fn zeros(d: usize, hidden: usize, activation: Activation) -> Self {
        DrnParams {
            activation,
            alpha: 0.0,
            beta: vec![0.0; hidden],
            alpha_scale: 0.0,
            beta_scale: vec![0.0; hidden],
            gamma: vec![0.0; hidden],
            delta: vec![0.0; hidden * d],
            d,
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn hidden(&self) -> usize {
        self.beta.len()
    }

    /// `(d + 3) H + 2`.
    pub fn num_params(&self) -> usize {
        Self::count(self.d, self.hidden())
    }

    pub fn count(d: usize, hidden: usize) -> usize {
        (d + 3) * hidden + 2
    }

    /// Flat layout `[alpha, beta.., alpha_scale, beta_scale.., gamma.., delta..]`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.num_params());
        v.push(self.alpha);
        v.extend_from_slice(&self.beta);
        v.push(self.alpha_scale);
        v.extend_from_slice(&self.beta_scale);
        v.extend_from_slice(&self.gamma);
        v.extend_from_slice(&self.delta);
        v
    }

    pub fn from_vec(theta: &[f64], d: usize, hidden: usize, activation: Activation) -> Result<Self> {
        if theta.len() != Self::count(d, hidden) {
            return input(format!(
                "DRN with d={d}, H={hidden} needs {} parameters",
                Self::count(d, hidden)
            ));
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return input("non-finite DRN parameter");
        }
        let h = hidden;
        Ok(DrnParams {
            activation,
            alpha: theta[0],
            beta: theta[1..1 + h].to_vec(),
            alpha_scale: theta[1 + h],
            beta_scale: theta[2 + h..2 + 2 * h].to_vec(),
            gamma: theta[2 + 2 * h..2 + 3 * h].to_vec(),
            delta: theta[2 + 3 * h..].to_vec(),
            d,
        })
    }

    fn pre_activations(&self, x: &[f64]) -> Vec<f64> {
        self.gamma
            .iter()
            .enumerate()
            .map(|(k, g)| g + dot(&self.delta[k * self.d..(k + 1) * self.d], x))
            .collect()
    }
}

struct Forward {
    pre: Vec<f64>,
    hidden: Vec<f64>,
    m: f64,
    u: f64,
}

fn forward(p: &DrnParams, x: &[f64]) -> Forward {
    let pre = p.pre_activations(x);
    let hidden: Vec<f64> = pre.iter().map(|z| p.activation.apply(*z)).collect();
    let m = p.alpha + dot(&p.beta, &hidden);
    let u = p.alpha_scale + dot(&p.beta_scale, &hidden);
    Forward { pre, hidden, m, u }
}

pub fn drn_predict(p: &DrnParams, x: &[f64]) -> Result<GaussianLS> {
    check_dim(x, p.d)?;
    let f = forward(p, x);
    GaussianLS::new(f.m, scale_link(f.u).0)
}

/// Gradient of `crps(drn_predict(p, x), y)` in the flat layout, plus whether
/// the scale clamp was active.
pub fn drn_grad(p: &DrnParams, x: &[f64], y: f64) -> Result<(Vec<f64>, bool)> {
    check_dim(x, p.d)?;
    let f = forward(p, x);
    let (sigma, clamped) = scale_link(f.u);
    let g = crps_gaussian_grad(&GaussianLS::new(f.m, sigma)?, y);
    let d_u = if clamped { 0.0 } else { g.d_sigma * sigmoid(f.u) / (2.0 * sigma) };
    let h = p.hidden();
    let mut out = vec![0.0; p.num_params()];
    out[0] = g.d_m;
    out[1 + h] = d_u;
    for k in 0..h {
        out[1 + k] = g.d_m * f.hidden[k];
        out[2 + h + k] = d_u * f.hidden[k];
        let d_pre = (g.d_m * p.beta[k] + d_u * p.beta_scale[k]) * p.activation.derivative(f.pre[k]);
        out[2 + 2 * h + k] = d_pre;
        for (j, xj) in x.iter().enumerate() {
            out[2 + 3 * h + k * p.d + j] = d_pre * xj;
        }
    }
    Ok((out, clamped))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::crps_gaussian;
    use crate::models::{emos_grad, emos_predict, EmosParams};
    use crate::rng;
    use rand::Rng;

    fn random_net(d: usize, h: usize, act: Activation, seed: u64) -> DrnParams {
        let mut r = rng::stream(seed, &[]);
        let theta: Vec<f64> = (0..DrnParams::count(d, h)).map(|_| r.random_range(-1.0..1.0)).collect();
        DrnParams::from_vec(&theta, d, h, act).unwrap()
    }

    #[test]
    fn zero_slopes_match_emos() {
        let mut p = random_net(2, 3, Activation::Tanh, 1);
        p.beta = vec![0.0; 3];
        p.beta_scale = vec![0.0; 3];
        let e = EmosParams {
            alpha: p.alpha,
            beta: vec![0.0; 2],
            alpha_scale: p.alpha_scale,
            beta_scale: vec![0.0; 2],
        };
        for x in [[0.0, 0.0], [3.0, -2.0]] {
            assert_eq!(drn_predict(&p, &x).unwrap(), emos_predict(&e, &x).unwrap());
        }
    }

    #[test]
    fn empty_hidden_layer_is_emos() {
        let p = DrnParams::from_vec(&[0.5, -0.2], 3, 0, Activation::Relu).unwrap();
        let e = EmosParams {
            alpha: 0.5,
            beta: vec![0.0; 3],
            alpha_scale: -0.2,
            beta_scale: vec![0.0; 3],
        };
        let x = [1.0, 2.0, 3.0];
        assert_eq!(drn_predict(&p, &x).unwrap(), emos_predict(&e, &x).unwrap());
    }

    #[test]
    fn single_relu_unit() {
        let mut p = DrnParams::zeros(1, 1, Activation::Relu);
        p.delta = vec![1.0];
        p.beta = vec![1.0];
        assert_eq!(drn_predict(&p, &[2.0]).unwrap().m(), 2.0);
    }

    #[test]
    fn forward_pass_matches_unrolled() {
        let p = random_net(2, 2, Activation::Tanh, 7);
        let x = [0.4, -1.3];
        let h0 = (p.gamma[0] + p.delta[0] * x[0] + p.delta[1] * x[1]).tanh();
        let h1 = (p.gamma[1] + p.delta[2] * x[0] + p.delta[3] * x[1]).tanh();
        let m = p.alpha + p.beta[0] * h0 + p.beta[1] * h1;
        let u = p.alpha_scale + p.beta_scale[0] * h0 + p.beta_scale[1] * h1;
        let s = (1.0 + u.exp()).ln().sqrt();
        let g = drn_predict(&p, &x).unwrap();
        assert!((g.m() - m).abs() < 1e-12);
        assert!((g.sigma() - s).abs() < 1e-12);
    }

    #[test]
    fn gradient_at_mean_has_zero_location_part() {
        let p = DrnParams::zeros(1, 2, Activation::Tanh);
        let (g, _) = drn_grad(&p, &[0.7], 0.0).unwrap();
        assert_eq!(g[0], 0.0);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for (seed, act) in [(3, Activation::Tanh), (4, Activation::Relu), (5, Activation::Identity)] {
            let p = random_net(2, 3, act, seed);
            let x = [0.35, -0.8];
            let y = 0.2;
            let (g, _) = drn_grad(&p, &x, y).unwrap();
            let theta = p.to_vec();
            let h = 1e-5;
            for k in 0..theta.len() {
                let f = |t: f64| {
                    let mut th = theta.clone();
                    th[k] = t;
                    let q = DrnParams::from_vec(&th, 2, 3, act).unwrap();
                    crps_gaussian(&drn_predict(&q, &x).unwrap(), y)
                };
                let fd = (f(theta[k] + h) - f(theta[k] - h)) / (2.0 * h);
                assert!(
                    (fd - g[k]).abs() <= 1e-4 * fd.abs().max(g[k].abs()).max(1.0),
                    "{act:?} k={k}: {fd} vs {}",
                    g[k]
                );
            }
        }
    }

    #[test]
    fn linear_unit_collapses_to_emos_gradient() {
        // With g = identity, gamma = 0, delta = 1, the hidden unit is x itself.
        let mut p = DrnParams::zeros(1, 1, Activation::Identity);
        p.alpha = 0.2;
        p.beta = vec![0.9];
        p.alpha_scale = -0.3;
        p.beta_scale = vec![0.4];
        p.delta = vec![1.0];
        let e = EmosParams {
            alpha: 0.2,
            beta: vec![0.9],
            alpha_scale: -0.3,
            beta_scale: vec![0.4],
        };
        let (gd, _) = drn_grad(&p, &[1.7], 0.5).unwrap();
        let (ge, _) = emos_grad(&e, &[1.7], 0.5).unwrap();
        for k in 0..4 {
            assert!((gd[k] - ge[k]).abs() < 1e-14);
        }
    }
}
