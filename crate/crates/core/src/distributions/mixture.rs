use serde::{Deserialize, Serialize};

use super::{MixtureSpec, PredictiveDistribution, WeightedEmpirical};
use crate::error::{Error, Result};

/// Controls how Gaussian components are turned into atoms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscretizationConfig {
    /// Gaussian components become atoms at quantile levels `(i + 1/2) / n_quantiles`.
    pub n_quantiles: usize,
}

impl Default for DiscretizationConfig {
    fn default() -> Self {
        DiscretizationConfig { n_quantiles: 512 }
    }
}

/// Collapses a mixture into a single weighted empirical distribution.
///
/// Empirical components keep their atoms with weights scaled by the mixture
/// weight; Gaussian components are replaced by `n_quantiles` equally weighted
/// midpoint quantiles. Nested mixtures are flattened recursively.
pub fn flatten_mixture(m: &MixtureSpec, disc: &DiscretizationConfig) -> Result<WeightedEmpirical> {
    if disc.n_quantiles < 1 {
        return Err(Error::Config("n_quantiles must be at least 1".into()));
    }
    let mut atoms = Vec::new();
    let mut weights = Vec::new();
    collect(m, 1.0, Some(disc), &mut atoms, &mut weights);
    WeightedEmpirical::from_unnormalized(atoms, weights)
}

/// Weighted-atom version of any predictive distribution: exact when there is
/// no Gaussian part, quantile-discretized otherwise.
pub fn discretize(f: &PredictiveDistribution, disc: &DiscretizationConfig) -> Result<WeightedEmpirical> {
    match f {
        PredictiveDistribution::Empirical(e) => Ok(e.clone()),
        PredictiveDistribution::Mixture(m) if !f.has_continuous_part() => Ok(flatten_exact(m)),
        PredictiveDistribution::Mixture(m) => flatten_mixture(m, disc),
        PredictiveDistribution::Gaussian(_) => {
            flatten_mixture(&MixtureSpec::new(vec![f.clone()], vec![1.0])?, disc)
        }
    }
}

/// Exact flattening of a mixture without Gaussian parts.
pub(crate) fn flatten_exact(m: &MixtureSpec) -> WeightedEmpirical {
    let mut atoms = Vec::new();
    let mut weights = Vec::new();
    collect(m, 1.0, None, &mut atoms, &mut weights);
    WeightedEmpirical::from_unnormalized(atoms, weights).expect("mixture of valid components has positive mass")
}

fn collect(
    m: &MixtureSpec,
    scale: f64,
    disc: Option<&DiscretizationConfig>,
    atoms: &mut Vec<f64>,
    weights: &mut Vec<f64>,
) {
    for (c, &lambda) in m.components().iter().zip(m.weights()) {
        let s = scale * lambda;
        if s == 0.0 {
            continue;
        }
        match c {
            PredictiveDistribution::Empirical(e) => {
                atoms.extend_from_slice(e.atoms());
                weights.extend(e.weights().iter().map(|w| w * s));
            }
            PredictiveDistribution::Gaussian(g) => {
                let n = disc.map(|d| d.n_quantiles).expect("gaussian component needs a discretization");
                let w = s / n as f64;
                for i in 0..n {
                    atoms.push(g.quantile((i as f64 + 0.5) / n as f64));
                    weights.push(w);
                }
            }
            PredictiveDistribution::Mixture(inner) => collect(inner, s, disc, atoms, weights),
        }
    }
}
