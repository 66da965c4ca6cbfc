//! Distributional regression with the continuous ranked probability score.
//!
//! The crate covers the whole loop: predictive distributions and their CRPS,
//! the four model families (EMOS, DRN, distributional KNN and random-forest
//! weights), empirical risk minimization on a compact parameter box, model
//! selection and convex aggregation on a validation sample, closed-form
//! concentration bounds with a Monte-Carlo coverage harness, and the
//! train/validation/test benchmark protocol.

pub mod bounds;
pub mod distributions;
pub mod ensemble;
pub mod error;
pub mod models;
pub mod pipeline;
pub mod risk_fit;
pub mod rng;

pub use distributions::{
    cdf_l2_divergence, crps, crps_empirical, crps_gaussian, crps_gaussian_grad, crps_integral,
    first_abs_moment, flatten_mixture, w1_distance, DiscretizationConfig, GaussianLS, MixtureSpec,
    PredictiveDistribution, QuadratureConfig, WeightedEmpirical,
};
pub use error::{Error, Result};
pub use models::{Forecaster, FittedModel};
pub use pipeline::data::Dataset;
