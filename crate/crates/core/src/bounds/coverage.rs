use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::{bound_aggregation_regret, bound_estimation, bound_selection_regret, BoundInputs, SyntheticGenerator};
use crate::distributions::first_abs_moment;
use crate::ensemble::{regret_aggregation, regret_selection, CandidateSet};
use crate::error::{Error, Result};
use crate::models::{sigmoid, softplus, subgauss_proxy, FittedModel, Forecaster, KnnModel, ParamBox};
use crate::risk_fit::{excess_risk_exact, fit_emos, mc_sample, scores, OptimizerConfig};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    /// EMOS fitted on a realizable linear truth; error against the bound on
    /// estimation error.
    Estimation,
    /// Selection between two KNN fits on the sine truth.
    Selection,
    /// Convex aggregation of EMOS and KNN on the sine truth.
    Aggregation,
    /// Point-mass truth: every candidate is exact, so regret is zero.
    Constant,
}

impl Scenario {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "estimation" => Ok(Scenario::Estimation),
            "selection" => Ok(Scenario::Selection),
            "aggregation" => Ok(Scenario::Aggregation),
            "constant" => Ok(Scenario::Constant),
            other => Err(Error::Config(format!("unknown scenario `{other}`"))),
        }
    }
}

/// How `inf_theta R(F_theta)` is obtained for the estimation scenario.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimationOracle {
    /// The truth lies in the box, so the infimum is the truth's risk and the
    /// error is the expected cdf divergence to the truth.
    Exact,
    /// Fit on an independent sample 50 times larger and compare Monte-Carlo
    /// risks.
    Oversized,
}

/// Realizable EMOS problem with analytic constants for the estimation bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimationPreset {
    pub truth: SyntheticGenerator,
    pub param_box: ParamBox,
    pub beta1: f64,
    pub beta2: f64,
    pub lipschitz: f64,
    pub radius: f64,
    pub k: usize,
}

impl EstimationPreset {
    /// The linear preset with a box of half-width 1 around the true parameters.
    pub fn linear_emos() -> Self {
        let truth = SyntheticGenerator::linear_emos();
        let SyntheticGenerator::LinearEmos { params } = &truth else {
            unreachable!()
        };
        let bx = ParamBox::around(&params.to_vec(), 1.0).expect("finite parameters");
        Self::for_emos(truth.clone(), bx)
    }

    /// Constants for EMOS on `[0, 1]^d` covariates:
    /// `beta2 = sup m1 <= sup|m| + sup sigma * sqrt(2/pi)`, and
    /// `L = sqrt(1 + d) sqrt(1 + (sqrt(2/pi) sup|dsigma/du|)^2)` from the
    /// location-scale Wasserstein bound.
    pub fn for_emos(truth: SyntheticGenerator, bx: ParamBox) -> Self {
        let d = truth.dim();
        let lo = bx.lower();
        let hi = bx.upper();
        let abs_max = |i: usize| lo[i].abs().max(hi[i].abs());
        let m_abs = abs_max(0) + (1..=d).map(abs_max).sum::<f64>();
        let u_lo = lo[d + 1] + (d + 2..2 * d + 2).map(|i| lo[i].min(0.0)).sum::<f64>();
        let u_hi = hi[d + 1] + (d + 2..2 * d + 2).map(|i| hi[i].max(0.0)).sum::<f64>();
        let sigma_max = softplus(u_hi).sqrt();
        let abs_gauss = (2.0 / std::f64::consts::PI).sqrt();
        let beta2 = m_abs + sigma_max * abs_gauss;
        // sup of sigmoid(u) / (2 sqrt(softplus(u))) over the attainable range.
        let steps = 10_000;
        let slope = (0..=steps)
            .map(|i| {
                let u = u_lo + (u_hi - u_lo) * i as f64 / steps as f64;
                sigmoid(u) / (2.0 * softplus(u).sqrt())
            })
            .fold(0.0, f64::max);
        let lipschitz = ((1 + d) as f64).sqrt() * (1.0 + (abs_gauss * slope).powi(2)).sqrt();
        EstimationPreset {
            beta1: truth.beta_y(),
            beta2,
            lipschitz,
            radius: bx.circumradius(),
            k: 2 * (1 + d),
            param_box: bx,
            truth,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CoverageConfig {
    pub scenario: Scenario,
    pub reps: usize,
    /// Training sizes (estimation) or validation sizes (regret scenarios).
    pub grid: Vec<usize>,
    pub delta: f64,
    pub seed: u64,
    /// Training size for the regret scenarios.
    pub n_train: usize,
    /// Monte-Carlo draws for theoretical risks.
    pub n_mc: usize,
    /// Covariate draws for the exact excess risk.
    pub x_mc: usize,
    /// Neighbour counts of the selection candidates.
    pub knn_ks: Vec<usize>,
    /// Neighbour count of the KNN candidate in the aggregation scenario.
    pub aggregation_k: usize,
    pub grid_step: f64,
    pub oracle: EstimationOracle,
    pub optimizer: OptimizerConfig,
}

impl Default for CoverageConfig {
    fn default() -> Self {
        Self::for_scenario(Scenario::Selection)
    }
}

impl CoverageConfig {
    pub fn for_scenario(scenario: Scenario) -> Self {
        let (reps, grid, n_mc) = match scenario {
            Scenario::Estimation => (100, vec![250, 1000, 4000], 100_000),
            Scenario::Selection => (200, vec![250, 1000], 10_000),
            Scenario::Aggregation => (100, vec![1000], 4_000),
            Scenario::Constant => (50, vec![100], 1_000),
        };
        CoverageConfig {
            scenario,
            reps,
            grid,
            delta: 0.1,
            seed: 0,
            n_train: 500,
            n_mc,
            x_mc: 2_000,
            knn_ks: vec![10, 40],
            aggregation_k: 20,
            grid_step: 0.02,
            oracle: EstimationOracle::Exact,
            optimizer: OptimizerConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub scenario: Scenario,
    pub delta: f64,
    pub reps: usize,
    pub grid: Vec<usize>,
    /// Measured error or regret, indexed `[grid point][repetition]`.
    pub values: Vec<Vec<f64>>,
    /// High-probability bound for each repetition.
    pub bounds: Vec<Vec<f64>>,
    pub bound_valid: Vec<Vec<bool>>,
    /// Fraction of repetitions with value <= bound, per grid point.
    pub coverage: Vec<f64>,
    /// `2 sqrt(delta (1 - delta) / reps)`.
    pub binomial_slack: f64,
    /// `1 - delta - binomial_slack`.
    pub required_coverage: f64,
    pub medians: Vec<f64>,
    pub means: Vec<f64>,
    /// Least-squares slope of log median against log grid size.
    pub slope: Option<f64>,
    pub constants: BTreeMap<String, f64>,
    pub version: String,
}

struct Outcome {
    value: f64,
    bound: f64,
    valid: bool,
}

const TRAIN_STREAM: u64 = 0x7A;
const VAL_STREAM: u64 = 0x7B;
const ORACLE_STREAM: u64 = 0x7C;

/// Runs `reps` independent repetitions at every grid point and reports how
/// often the measured quantity stays below its bound.
pub fn coverage_experiment(cfg: &CoverageConfig) -> Result<CoverageReport> {
    if cfg.reps < 50 {
        return Err(Error::Config(format!("reps = {} is below the minimum of 50", cfg.reps)));
    }
    if cfg.grid.is_empty() {
        return Err(Error::Config("empty grid".into()));
    }
    if !(cfg.delta > 0.0 && cfg.delta < 1.0) {
        return Err(Error::Config(format!("delta = {} must lie in (0, 1)", cfg.delta)));
    }
    let preset = EstimationPreset::linear_emos();
    let mut constants = BTreeMap::new();
    match cfg.scenario {
        Scenario::Estimation => {
            if let Some(&n) = cfg.grid.iter().find(|&&n| n < preset.k) {
                return Err(Error::Config(format!("grid size {n} is below K = {}", preset.k)));
            }
            constants.insert("beta1".into(), preset.beta1);
            constants.insert("beta2".into(), preset.beta2);
            constants.insert("L".into(), preset.lipschitz);
            constants.insert("R".into(), preset.radius);
            constants.insert("K".into(), preset.k as f64);
        }
        Scenario::Selection | Scenario::Aggregation | Scenario::Constant => {
            let min_k = cfg.knn_ks.iter().chain([&cfg.aggregation_k]).max().copied().unwrap_or(1);
            if cfg.n_train < min_k.max(4) {
                return Err(Error::Config(format!("n_train = {} too small", cfg.n_train)));
            }
            if cfg.grid.contains(&0) {
                return Err(Error::Config("validation size must be positive".into()));
            }
            constants.insert("beta1".into(), regret_truth(cfg.scenario).beta_y());
        }
    }

    let jobs: Vec<(usize, usize)> = (0..cfg.grid.len())
        .flat_map(|g| (0..cfg.reps).map(move |r| (g, r)))
        .collect();
    let outcomes: Vec<Result<Outcome>> = jobs
        .par_iter()
        .map(|&(g, r)| {
            let seed = rng::child_seed(cfg.seed, &[r as u64]);
            let size = cfg.grid[g];
            match cfg.scenario {
                Scenario::Estimation => estimation_rep(cfg, &preset, size, seed),
                Scenario::Selection | Scenario::Constant => selection_rep(cfg, size, seed),
                Scenario::Aggregation => aggregation_rep(cfg, size, seed),
            }
        })
        .collect();

    let g_len = cfg.grid.len();
    let mut values = vec![Vec::with_capacity(cfg.reps); g_len];
    let mut bounds = vec![Vec::with_capacity(cfg.reps); g_len];
    let mut valid = vec![Vec::with_capacity(cfg.reps); g_len];
    for (&(g, _), o) in jobs.iter().zip(outcomes) {
        let o = o?;
        values[g].push(o.value);
        bounds[g].push(o.bound);
        valid[g].push(o.valid);
    }
    let coverage = values
        .iter()
        .zip(&bounds)
        .map(|(v, b)| v.iter().zip(b).filter(|(v, b)| v <= b).count() as f64 / cfg.reps as f64)
        .collect();
    let medians: Vec<f64> = values.iter().map(|v| median(v)).collect();
    let means = values.iter().map(|v| v.iter().sum::<f64>() / v.len() as f64).collect();
    let slope = (g_len >= 2).then(|| {
        let xs: Vec<f64> = cfg.grid.iter().map(|&n| n as f64).collect();
        log_log_slope(&xs, &medians)
    });
    let slack = 2.0 * (cfg.delta * (1.0 - cfg.delta) / cfg.reps as f64).sqrt();
    Ok(CoverageReport {
        scenario: cfg.scenario,
        delta: cfg.delta,
        reps: cfg.reps,
        grid: cfg.grid.clone(),
        values,
        bounds,
        bound_valid: valid,
        coverage,
        binomial_slack: slack,
        required_coverage: 1.0 - cfg.delta - slack,
        medians,
        means,
        slope,
        constants,
        version: env!("CARGO_PKG_VERSION").into(),
    })
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Least-squares slope of `log y` on `log x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn estimation_rep(cfg: &CoverageConfig, p: &EstimationPreset, n: usize, seed: u64) -> Result<Outcome> {
    let train = p.truth.sample(n, &mut rng::stream(seed, &[TRAIN_STREAM, n as u64]));
    let fit = fit_emos(&train, Some(&p.param_box), &cfg.optimizer, seed)?;
    let value = match cfg.oracle {
        EstimationOracle::Exact => excess_risk_exact(&fit.model(), &p.truth, cfg.x_mc, seed)?,
        EstimationOracle::Oversized => {
            let big = p
                .truth
                .sample(50 * n, &mut rng::stream(seed, &[ORACLE_STREAM, n as u64]));
            let oracle = fit_emos(&big, Some(&p.param_box), &cfg.optimizer, seed)?;
            let sample = mc_sample(&p.truth, cfg.n_mc, seed);
            let a = scores(&fit.model(), &sample)?;
            let b = scores(&oracle.model(), &sample)?;
            a.iter().zip(&b).map(|(a, b)| a - b).sum::<f64>() / cfg.n_mc as f64
        }
    };
    let b = bound_estimation(&BoundInputs {
        n: n as f64,
        k: p.k as f64,
        delta: cfg.delta,
        beta1: p.beta1,
        beta2: p.beta2,
        lipschitz: p.lipschitz,
        radius: p.radius,
        ..BoundInputs::default()
    })?;
    Ok(Outcome {
        value,
        bound: b.value,
        valid: b.valid,
    })
}

fn regret_truth(s: Scenario) -> SyntheticGenerator {
    match s {
        Scenario::Constant => SyntheticGenerator::constant(1.0, 0.0),
        _ => SyntheticGenerator::sine(),
    }
}

/// Bound on `m1` of a candidate's predictions: `max |Y_i|` for the weighted
/// empirical families, otherwise the largest value over a covariate grid.
pub fn candidate_m1_bound(model: &FittedModel, train_y: &[f64], d: usize, seed: u64) -> Result<f64> {
    match model {
        FittedModel::Knn(_) | FittedModel::Drf(_) => subgauss_proxy(train_y),
        _ => {
            let points: Vec<Vec<f64>> = if d == 1 {
                (0..=1000).map(|i| vec![i as f64 / 1000.0]).collect()
            } else {
                let g = SyntheticGenerator::Constant { d, c: 0.0, sigma0: 1.0 };
                let mut r = rng::stream(seed, &[0xB0]);
                (0..4096).map(|_| g.sample_x(&mut r)).collect()
            };
            let mut top: f64 = 0.0;
            for x in &points {
                top = top.max(first_abs_moment(&model.predict(x)?));
            }
            Ok(top)
        }
    }
}

fn selection_rep(cfg: &CoverageConfig, big_n: usize, seed: u64) -> Result<Outcome> {
    let truth = regret_truth(cfg.scenario);
    let train = truth.sample(cfg.n_train, &mut rng::stream(seed, &[TRAIN_STREAM]));
    let val = truth.sample(big_n, &mut rng::stream(seed, &[VAL_STREAM, big_n as u64]));
    let candidates = cfg
        .knn_ks
        .iter()
        .map(|&k| Ok((format!("knn{k}"), FittedModel::Knn(KnnModel::fit(&train, k, false)?))))
        .collect::<Result<Vec<_>>>()?;
    let c = CandidateSet::new(candidates)?;
    let regret = regret_selection(&c, &truth, &val, cfg.n_mc, seed)?;
    let b = bound_selection_regret(&BoundInputs {
        big_n: big_n as f64,
        m: c.len() as f64,
        delta: cfg.delta,
        beta1: truth.beta_y(),
        beta_n: subgauss_proxy(train.y())?,
        ..BoundInputs::default()
    })?;
    Ok(Outcome {
        value: regret.regret,
        bound: b.high_probability.value,
        valid: b.high_probability.valid,
    })
}

fn aggregation_rep(cfg: &CoverageConfig, big_n: usize, seed: u64) -> Result<Outcome> {
    let truth = regret_truth(cfg.scenario);
    let train = truth.sample(cfg.n_train, &mut rng::stream(seed, &[TRAIN_STREAM]));
    let val = truth.sample(big_n, &mut rng::stream(seed, &[VAL_STREAM, big_n as u64]));
    let emos = fit_emos(&train, None, &cfg.optimizer, seed)?.model();
    let knn = FittedModel::Knn(KnnModel::fit(&train, cfg.aggregation_k, false)?);
    let mut beta_n: f64 = 0.0;
    for m in [&emos, &knn] {
        beta_n = beta_n.max(candidate_m1_bound(m, train.y(), train.d(), seed)?);
    }
    let c = CandidateSet::new(vec![("emos".into(), emos), ("knn".into(), knn)])?;
    let regret = regret_aggregation(&c, &truth, &val, cfg.grid_step, cfg.n_mc, seed)?;
    let b = bound_aggregation_regret(&BoundInputs {
        big_n: big_n as f64,
        m: c.len() as f64,
        delta: cfg.delta,
        beta1: truth.beta_y(),
        beta_n,
        max_m1: beta_n,
        ..BoundInputs::default()
    })?;
    Ok(Outcome {
        value: regret.regret,
        bound: b.high_probability.value,
        valid: b.high_probability.valid,
    })
}
