//! Model selection and convex aggregation on a validation sample, and regret
//! against oracle choices when the truth is known.

use serde::{Deserialize, Serialize};

use crate::bounds::SyntheticGenerator;
use crate::distributions::{discretize, first_abs_moment, DiscretizationConfig};
use crate::error::{input, Error, Result};
use crate::models::{FittedModel, Forecaster};
use crate::pipeline::Dataset;
use crate::risk_fit::{empirical_risk, mc_sample, nelder_mead, scores, NelderMeadConfig};

/// Named fitted models competing on the same covariates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    names: Vec<String>,
    models: Vec<FittedModel>,
}

impl CandidateSet {
    pub fn new(candidates: Vec<(String, FittedModel)>) -> Result<Self> {
        if candidates.is_empty() {
            return input("candidate set is empty");
        }
        let (names, models): (Vec<_>, Vec<_>) = candidates.into_iter().unzip();
        let dims: Vec<usize> = models.iter().filter_map(|m| m.input_dim()).collect();
        if dims.windows(2).any(|w| w[0] != w[1]) {
            return input(format!("candidates disagree on covariate dimension: {dims:?}"));
        }
        Ok(CandidateSet { names, models })
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn models(&self) -> &[FittedModel] {
        &self.models
    }

    /// The mixture with weights `lambda` as a single model.
    pub fn mixture(&self, lambda: &[f64]) -> FittedModel {
        FittedModel::Mixture {
            weights: lambda.to_vec(),
            members: self.models.clone(),
        }
    }
}

fn check_val(val: &Dataset) -> Result<()> {
    if val.is_empty() {
        return input("validation set is empty");
    }
    Ok(())
}

/// Mean validation CRPS of every candidate.
pub fn validation_risks(c: &CandidateSet, val: &Dataset) -> Result<Vec<f64>> {
    check_val(val)?;
    c.models.iter().map(|m| Ok(empirical_risk(m, val)?.value)).collect()
}

/// Index of the smallest risk, first index on ties.
pub fn argmin(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold(0, |best, (i, v)| if *v < values[best] { i } else { best })
}

/// Index (0-based) of the candidate with the smallest validation risk.
pub fn select_model(c: &CandidateSet, val: &Dataset) -> Result<usize> {
    Ok(argmin(&validation_risks(c, val)?))
}

/// Per-point merged atom tables, so the mixture CRPS for any weight vector
/// costs one pass over the atoms.
pub struct MixtureScorer {
    m: usize,
    points: Vec<PointTable>,
}

struct PointTable {
    y: f64,
    atoms: Vec<f64>,
    /// Row-major `atoms x m` component weights.
    weights: Vec<f64>,
}

impl MixtureScorer {
    pub fn new(c: &CandidateSet, data: &Dataset, disc: &DiscretizationConfig) -> Result<Self> {
        check_val(data)?;
        let m = c.len();
        let points = data
            .rows()
            .zip(data.y())
            .map(|(x, &y)| {
                let mut triples: Vec<(f64, usize, f64)> = Vec::new();
                for (j, model) in c.models.iter().enumerate() {
                    let e = discretize(&model.predict(x)?, disc)?;
                    triples.extend(e.atoms().iter().zip(e.weights()).map(|(a, w)| (*a, j, *w)));
                }
                triples.sort_by(|a, b| a.0.total_cmp(&b.0));
                let mut atoms: Vec<f64> = Vec::new();
                let mut weights: Vec<f64> = Vec::new();
                for (a, j, w) in triples {
                    if atoms.last() != Some(&a) {
                        atoms.push(a);
                        weights.extend(std::iter::repeat_n(0.0, m));
                    }
                    let row = weights.len() - m;
                    weights[row + j] += w;
                }
                Ok(PointTable { y, atoms, weights })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(MixtureScorer { m, points })
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    /// Per-point CRPS of the mixture with weights `lambda`.
    pub fn scores(&self, lambda: &[f64]) -> Vec<f64> {
        self.points.iter().map(|p| self.point_score(p, lambda)).collect()
    }

    pub fn risk(&self, lambda: &[f64]) -> f64 {
        self.points.iter().map(|p| self.point_score(p, lambda)).sum::<f64>() / self.n() as f64
    }

    fn point_score(&self, p: &PointTable, lambda: &[f64]) -> f64 {
        let total: f64 = lambda.iter().sum();
        let mut abs_term = 0.0;
        let mut pair_term = 0.0;
        let mut cum_w = 0.0;
        let mut cum_wd = 0.0;
        for (a, row) in p.atoms.iter().zip(p.weights.chunks_exact(self.m)) {
            let w = row.iter().zip(lambda).map(|(r, l)| r * l).sum::<f64>() / total;
            if w == 0.0 {
                continue;
            }
            let d = a - p.y;
            abs_term += w * d.abs();
            pair_term += w * (d * cum_w - cum_wd);
            cum_w += w;
            cum_wd += w * d;
        }
        (abs_term - pair_term).max(0.0)
    }
}

fn softmax(u: &[f64]) -> Vec<f64> {
    let top = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = u.iter().map(|v| (v - top).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AggregationConfig {
    pub nelder_mead: NelderMeadConfig,
    /// Initial simplex edge in logit space.
    pub initial_step: f64,
    /// Logit given to the favoured candidate in the vertex starts.
    pub vertex_logit: f64,
    /// Softmin temperature as a fraction of the mean validation risk.
    pub softmin_temperature: f64,
    pub discretization: DiscretizationConfig,
}

impl Default for AggregationConfig {
    fn default() -> Self {
        AggregationConfig {
            nelder_mead: NelderMeadConfig::default(),
            initial_step: 1.0,
            vertex_logit: 30.0,
            softmin_temperature: 0.05,
            discretization: DiscretizationConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregationResult {
    pub weights: Vec<f64>,
    pub validation_risk: f64,
    pub vertex_risks: Vec<f64>,
    pub trace: Vec<f64>,
    pub evaluations: usize,
    pub converged: bool,
    pub seed: u64,
}

/// Convex weights minimizing validation CRPS of the mixture.
///
/// Searches logits with Nelder-Mead from the uniform mixture, every vertex and
/// the softmin of validation risks, then keeps the best of that and the pure
/// candidates.
pub fn aggregate_convex(
    c: &CandidateSet,
    val: &Dataset,
    cfg: &AggregationConfig,
    seed: u64,
) -> Result<AggregationResult> {
    let vertex_risks = validation_risks(c, val)?;
    let m = c.len();
    if m == 1 {
        return Ok(AggregationResult {
            weights: vec![1.0],
            validation_risk: vertex_risks[0],
            vertex_risks,
            trace: Vec::new(),
            evaluations: 0,
            converged: true,
            seed,
        });
    }
    let scorer = MixtureScorer::new(c, val, &cfg.discretization)?;
    let objective = |u: &[f64]| scorer.risk(&softmax(u));

    let mut starts = vec![vec![0.0; m]];
    for j in 0..m {
        let mut u = vec![0.0; m];
        u[j] = cfg.vertex_logit;
        starts.push(u);
    }
    let mean_risk = vertex_risks.iter().sum::<f64>() / m as f64;
    let tau = (cfg.softmin_temperature * mean_risk).max(1e-12);
    starts.push(vertex_risks.iter().map(|r| -(r - vertex_risks[argmin(&vertex_risks)]) / tau).collect());

    let steps = vec![cfg.initial_step; m];
    let mut evaluations = 0;
    let mut best: Option<crate::risk_fit::Minimum> = None;
    for s in &starts {
        let run = nelder_mead(objective, s, &steps, None, &cfg.nelder_mead);
        evaluations += run.evaluations;
        if best.as_ref().is_none_or(|b| run.value < b.value) {
            best = Some(run);
        }
    }
    let best = best.expect("at least one start");
    let j = argmin(&vertex_risks);
    let (weights, validation_risk) = if vertex_risks[j] <= best.value {
        let mut w = vec![0.0; m];
        w[j] = 1.0;
        (w, vertex_risks[j])
    } else {
        (softmax(&best.x), best.value)
    };
    Ok(AggregationResult {
        weights,
        validation_risk,
        vertex_risks,
        trace: best.trace,
        evaluations,
        converged: best.converged,
        seed,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionRegret {
    pub selected: usize,
    pub oracle: usize,
    /// Theoretical risk of the selected model minus the best theoretical risk.
    pub regret: f64,
    /// Standard error of the regret estimate.
    pub stderr: f64,
    pub theoretical_risks: Vec<f64>,
    pub validation_risks: Vec<f64>,
}

/// Regret of validation-based selection, with theoretical risks estimated on
/// one shared Monte-Carlo sample.
pub fn regret_selection(
    c: &CandidateSet,
    truth: &SyntheticGenerator,
    val: &Dataset,
    n_mc: usize,
    seed: u64,
) -> Result<SelectionRegret> {
    if n_mc < 2 {
        return input("n_mc must be at least 2");
    }
    let validation = validation_risks(c, val)?;
    let selected = argmin(&validation);
    let sample = mc_sample(truth, n_mc, seed);
    let per_model: Vec<Vec<f64>> = c.models.iter().map(|m| scores(m, &sample)).collect::<Result<_>>()?;
    let risks: Vec<f64> = per_model.iter().map(|s| s.iter().sum::<f64>() / n_mc as f64).collect();
    let oracle = argmin(&risks);
    let diff: Vec<f64> = per_model[selected]
        .iter()
        .zip(&per_model[oracle])
        .map(|(a, b)| a - b)
        .collect();
    Ok(SelectionRegret {
        selected,
        oracle,
        regret: risks[selected] - risks[oracle],
        stderr: mean_stderr(&diff),
        theoretical_risks: risks,
        validation_risks: validation,
    })
}

pub(crate) fn mean_stderr(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / ((n - 1.0) * n)).sqrt()
}

/// Largest candidate count the simplex-grid oracle accepts.
pub const GRID_ORACLE_MAX_CANDIDATES: usize = 4;

/// All weight vectors on the simplex whose coordinates are multiples of `step`.
pub fn simplex_grid(m: usize, step: f64) -> Result<Vec<Vec<f64>>> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::Config(format!("grid step {step} must lie in (0, 1]")));
    }
    let parts = (1.0 / step).round() as usize;
    let mut out = Vec::new();
    let mut current = vec![0usize; m];
    fn rec(i: usize, left: usize, cur: &mut Vec<usize>, parts: usize, out: &mut Vec<Vec<f64>>) {
        if i + 1 == cur.len() {
            cur[i] = left;
            out.push(cur.iter().map(|&c| c as f64 / parts as f64).collect());
            return;
        }
        for take in 0..=left {
            cur[i] = take;
            rec(i + 1, left - take, cur, parts, out);
        }
    }
    rec(0, parts, &mut current, parts, &mut out);
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregationRegret {
    pub weights: Vec<f64>,
    /// Theoretical risk at the fitted weights minus the grid minimum.
    pub regret: f64,
    pub stderr: f64,
    pub risk_at_weights: f64,
    pub grid_min: f64,
    pub grid_argmin: Vec<f64>,
    pub grid_step: f64,
    /// Upper bound on how far the grid minimum can sit above the simplex infimum:
    /// `2 E[max_m m1(F^m_X)] * M * step`.
    pub grid_gap_bound: f64,
}

/// Regret of convex aggregation against the best weights on a simplex grid,
/// all risks estimated on one shared Monte-Carlo sample.
pub fn regret_aggregation(
    c: &CandidateSet,
    truth: &SyntheticGenerator,
    val: &Dataset,
    grid_step: f64,
    n_mc: usize,
    seed: u64,
) -> Result<AggregationRegret> {
    let m = c.len();
    if m > GRID_ORACLE_MAX_CANDIDATES {
        return Err(Error::Capability(format!(
            "grid oracle supports at most {GRID_ORACLE_MAX_CANDIDATES} candidates, got {m}"
        )));
    }
    if n_mc < 2 {
        return input("n_mc must be at least 2");
    }
    let grid = simplex_grid(m, grid_step)?;
    let agg = aggregate_convex(c, val, &AggregationConfig::default(), seed)?;
    let sample = mc_sample(truth, n_mc, seed);
    let scorer = MixtureScorer::new(c, &sample, &DiscretizationConfig::default())?;
    let at_weights = scorer.scores(&agg.weights);
    let risk_at_weights = at_weights.iter().sum::<f64>() / n_mc as f64;
    let (grid_idx, grid_min) = grid
        .iter()
        .map(|l| scorer.risk(l))
        .enumerate()
        .fold((0, f64::INFINITY), |(bi, bv), (i, v)| if v < bv { (i, v) } else { (bi, bv) });
    let diff: Vec<f64> = at_weights
        .iter()
        .zip(scorer.scores(&grid[grid_idx]))
        .map(|(a, b)| a - b)
        .collect();
    let mut moment = 0.0;
    for x in sample.rows() {
        let mut top: f64 = 0.0;
        for model in &c.models {
            top = top.max(first_abs_moment(&model.predict(x)?));
        }
        moment += top;
    }
    moment /= n_mc as f64;
    Ok(AggregationRegret {
        weights: agg.weights,
        regret: risk_at_weights - grid_min,
        stderr: mean_stderr(&diff),
        risk_at_weights,
        grid_min,
        grid_argmin: grid[grid_idx].clone(),
        grid_step,
        grid_gap_bound: 2.0 * moment * m as f64 * grid_step,
    })
}
