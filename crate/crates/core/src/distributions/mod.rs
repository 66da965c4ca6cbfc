//! Predictive distributions on the real line and everything that consumes them:
//! CRPS (closed forms and a quadrature oracle), Wasserstein-1 distance, the
//! squared-cdf divergence, first absolute moments and mixture flattening.

mod mixture;
pub mod normal;
pub mod quadrature;
mod score;

use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};

pub use mixture::{discretize, flatten_mixture, DiscretizationConfig};
pub use quadrature::QuadratureConfig;
pub use score::{
    cdf_l2_divergence, crps, crps_empirical, crps_gaussian, crps_gaussian_grad, crps_integral,
    crps_with, first_abs_moment, w1_distance, GaussianGrad,
};

/// Tolerance on the total mass of weight vectors supplied by callers.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Discrete distribution `sum_i w_i * delta(y_i)` with sorted, distinct atoms
/// and strictly positive weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEmpirical", into = "RawEmpirical")]
pub struct WeightedEmpirical {
    atoms: Vec<f64>,
    weights: Vec<f64>,
    cumulative: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawEmpirical {
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

impl TryFrom<RawEmpirical> for WeightedEmpirical {
    type Error = Error;
    fn try_from(raw: RawEmpirical) -> Result<Self> {
        WeightedEmpirical::new(raw.atoms, raw.weights)
    }
}

impl From<WeightedEmpirical> for RawEmpirical {
    fn from(e: WeightedEmpirical) -> Self {
        RawEmpirical {
            atoms: e.atoms,
            weights: e.weights,
        }
    }
}

impl WeightedEmpirical {
    /// Builds a distribution from atoms and probability weights.
    ///
    /// Atoms are sorted, exactly equal atoms are merged and zero-weight atoms
    /// are dropped. The weights must already sum to one.
    pub fn new(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        validate_pairs(&atoms, &weights)?;
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return input(format!("weights sum to {total}, expected 1"));
        }
        Self::canonical(atoms, weights)
    }

    /// Like [`WeightedEmpirical::new`] but rescales nonnegative weights to unit mass.
    pub fn from_unnormalized(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        validate_pairs(&atoms, &weights)?;
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return input("weights must have positive finite total mass");
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Self::canonical(atoms, weights)
    }

    /// Uniform weights over `values` (repeated values accumulate mass).
    pub fn uniform(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return input("empirical distribution needs at least one atom");
        }
        let w = 1.0 / values.len() as f64;
        Self::from_unnormalized(values.to_vec(), vec![w; values.len()])
    }

    pub fn dirac(at: f64) -> Result<Self> {
        Self::new(vec![at], vec![1.0])
    }

    fn canonical(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let mut pairs: Vec<(f64, f64)> = atoms.into_iter().zip(weights).filter(|p| p.1 > 0.0).collect();
        if pairs.is_empty() {
            return input("all weights are zero");
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut atoms = Vec::with_capacity(pairs.len());
        let mut weights: Vec<f64> = Vec::with_capacity(pairs.len());
        for (a, w) in pairs {
            match atoms.last() {
                Some(&last) if last == a => *weights.last_mut().unwrap() += w,
                _ => {
                    atoms.push(a);
                    weights.push(w);
                }
            }
        }
        Ok(Self::assemble(atoms, weights))
    }

    fn assemble(atoms: Vec<f64>, weights: Vec<f64>) -> Self {
        let mut acc = 0.0;
        let cumulative = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        WeightedEmpirical {
            atoms,
            weights,
            cumulative,
        }
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn cdf(&self, z: f64) -> f64 {
        let k = self.atoms.partition_point(|&a| a <= z);
        if k == 0 {
            0.0
        } else if k == self.atoms.len() {
            1.0
        } else {
            self.cumulative[k - 1].min(1.0)
        }
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().zip(&self.weights).map(|(a, w)| a * w).sum()
    }
}

fn validate_pairs(atoms: &[f64], weights: &[f64]) -> Result<()> {
    if atoms.is_empty() {
        return input("empirical distribution needs at least one atom");
    }
    if atoms.len() != weights.len() {
        return input(format!(
            "{} atoms but {} weights",
            atoms.len(),
            weights.len()
        ));
    }
    if atoms.iter().any(|a| !a.is_finite()) {
        return input("atoms must be finite");
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return input("weights must be finite and nonnegative");
    }
    Ok(())
}

/// Gaussian location-scale distribution `N(m, sigma^2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGaussian", into = "RawGaussian")]
pub struct GaussianLS {
    m: f64,
    sigma: f64,
}

#[derive(Serialize, Deserialize)]
struct RawGaussian {
    m: f64,
    sigma: f64,
}

impl TryFrom<RawGaussian> for GaussianLS {
    type Error = Error;
    fn try_from(raw: RawGaussian) -> Result<Self> {
        GaussianLS::new(raw.m, raw.sigma)
    }
}

impl From<GaussianLS> for RawGaussian {
    fn from(g: GaussianLS) -> Self {
        RawGaussian {
            m: g.m,
            sigma: g.sigma,
        }
    }
}

impl GaussianLS {
    pub fn new(m: f64, sigma: f64) -> Result<Self> {
        if !m.is_finite() || !sigma.is_finite() {
            return input("gaussian parameters must be finite");
        }
        if sigma <= 0.0 {
            return input(format!("gaussian scale must be positive, got {sigma}"));
        }
        Ok(GaussianLS { m, sigma })
    }

    pub fn standard() -> Self {
        GaussianLS { m: 0.0, sigma: 1.0 }
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn cdf(&self, z: f64) -> f64 {
        normal::cdf((z - self.m) / self.sigma)
    }

    pub fn quantile(&self, p: f64) -> f64 {
        self.m + self.sigma * normal::quantile(p)
    }
}

/// Convex mixture `sum_m lambda_m F_m` of predictive distributions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMixture", into = "RawMixture")]
pub struct MixtureSpec {
    weights: Vec<f64>,
    components: Vec<PredictiveDistribution>,
}

#[derive(Serialize, Deserialize)]
struct RawMixture {
    weights: Vec<f64>,
    components: Vec<PredictiveDistribution>,
}

impl TryFrom<RawMixture> for MixtureSpec {
    type Error = Error;
    fn try_from(raw: RawMixture) -> Result<Self> {
        MixtureSpec::new(raw.components, raw.weights)
    }
}

impl From<MixtureSpec> for RawMixture {
    fn from(m: MixtureSpec) -> Self {
        RawMixture {
            weights: m.weights,
            components: m.components,
        }
    }
}

impl MixtureSpec {
    pub fn new(components: Vec<PredictiveDistribution>, weights: Vec<f64>) -> Result<Self> {
        if components.is_empty() {
            return input("mixture needs at least one component");
        }
        if components.len() != weights.len() {
            return input(format!(
                "{} components but {} weights",
                components.len(),
                weights.len()
            ));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return input("mixture weights must be finite and nonnegative");
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return input(format!("mixture weights sum to {total}, expected 1"));
        }
        Ok(MixtureSpec {
            weights,
            components,
        })
    }

    pub fn components(&self) -> &[PredictiveDistribution] {
        &self.components
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn cdf(&self, z: f64) -> f64 {
        self.components
            .iter()
            .zip(&self.weights)
            .map(|(c, w)| w * c.cdf(z))
            .sum::<f64>()
            .clamp(0.0, 1.0)
    }
}

/// Any predictive distribution the crate can score.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum PredictiveDistribution {
    Empirical(WeightedEmpirical),
    Gaussian(GaussianLS),
    Mixture(MixtureSpec),
}

impl From<WeightedEmpirical> for PredictiveDistribution {
    fn from(e: WeightedEmpirical) -> Self {
        PredictiveDistribution::Empirical(e)
    }
}

impl From<GaussianLS> for PredictiveDistribution {
    fn from(g: GaussianLS) -> Self {
        PredictiveDistribution::Gaussian(g)
    }
}

impl From<MixtureSpec> for PredictiveDistribution {
    fn from(m: MixtureSpec) -> Self {
        PredictiveDistribution::Mixture(m)
    }
}

impl PredictiveDistribution {
    pub fn cdf(&self, z: f64) -> f64 {
        match self {
            PredictiveDistribution::Empirical(e) => e.cdf(z),
            PredictiveDistribution::Gaussian(g) => g.cdf(z),
            PredictiveDistribution::Mixture(m) => m.cdf(z),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            PredictiveDistribution::Empirical(e) => e.mean(),
            PredictiveDistribution::Gaussian(g) => g.m,
            PredictiveDistribution::Mixture(m) => m
                .components
                .iter()
                .zip(&m.weights)
                .map(|(c, w)| w * c.mean())
                .sum(),
        }
    }

    /// True when the distribution has a continuous (Gaussian) part, i.e. cdf
    /// functionals are not piecewise constant.
    pub fn has_continuous_part(&self) -> bool {
        match self {
            PredictiveDistribution::Empirical(_) => false,
            PredictiveDistribution::Gaussian(_) => true,
            PredictiveDistribution::Mixture(m) => {
                m.components.iter().any(|c| c.has_continuous_part())
            }
        }
    }

    /// Interval outside which the cdf is 0 or 1 up to Gaussian tails clipped
    /// at `tail_sigmas` standard deviations.
    pub fn extent(&self, tail_sigmas: f64) -> (f64, f64) {
        match self {
            PredictiveDistribution::Empirical(e) => (e.atoms[0], *e.atoms.last().unwrap()),
            PredictiveDistribution::Gaussian(g) => {
                (g.m - tail_sigmas * g.sigma, g.m + tail_sigmas * g.sigma)
            }
            PredictiveDistribution::Mixture(m) => m
                .components
                .iter()
                .map(|c| c.extent(tail_sigmas))
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (a, b)| {
                    (lo.min(a), hi.max(b))
                }),
        }
    }

    /// Points where the cdf may jump (atoms) or where tail clipping starts.
    pub(crate) fn push_breakpoints(&self, tail_sigmas: f64, out: &mut Vec<f64>) {
        match self {
            PredictiveDistribution::Empirical(e) => out.extend_from_slice(&e.atoms),
            PredictiveDistribution::Gaussian(g) => {
                out.push(g.m - tail_sigmas * g.sigma);
                out.push(g.m);
                out.push(g.m + tail_sigmas * g.sigma);
            }
            PredictiveDistribution::Mixture(m) => {
                for c in &m.components {
                    c.push_breakpoints(tail_sigmas, out);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ties_are_merged_and_sorted() {
        let e = WeightedEmpirical::new(vec![2.0, 1.0, 2.0], vec![0.25, 0.5, 0.25]).unwrap();
        assert_eq!(e.atoms(), &[1.0, 2.0]);
        assert_eq!(e.weights(), &[0.5, 0.5]);
    }

    #[test]
    fn rejects_bad_weights() {
        assert!(WeightedEmpirical::new(vec![1.0], vec![0.9]).is_err());
        assert!(WeightedEmpirical::new(vec![1.0, 2.0], vec![1.5, -0.5]).is_err());
        assert!(WeightedEmpirical::new(vec![], vec![]).is_err());
        assert!(WeightedEmpirical::new(vec![f64::NAN], vec![1.0]).is_err());
    }

    #[test]
    fn rejects_nonpositive_scale() {
        assert!(GaussianLS::new(0.0, 0.0).is_err());
        assert!(GaussianLS::new(0.0, -1.0).is_err());
        assert!(GaussianLS::new(f64::INFINITY, 1.0).is_err());
    }

    #[test]
    fn empirical_cdf_is_right_continuous() {
        let e = WeightedEmpirical::new(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap();
        assert_eq!(e.cdf(-1e-12), 0.0);
        assert_eq!(e.cdf(0.0), 0.5);
        assert_eq!(e.cdf(0.999), 0.5);
        assert_eq!(e.cdf(1.0), 1.0);
    }

    #[test]
    fn json_schema_round_trip() {
        let text = r#"{"type":"mixture","weights":[0.5,0.5],"components":[
            {"type":"empirical","atoms":[0.0,1.0],"weights":[0.5,0.5]},
            {"type":"gaussian","m":1.0,"sigma":2.0}]}"#;
        let d: PredictiveDistribution = serde_json::from_str(text).unwrap();
        let back: PredictiveDistribution =
            serde_json::from_str(&serde_json::to_string(&d).unwrap()).unwrap();
        assert_eq!(d, back);
        let bad = r#"{"type":"gaussian","m":0.0,"sigma":-1.0}"#;
        assert!(serde_json::from_str::<PredictiveDistribution>(bad).is_err());
    }
}
