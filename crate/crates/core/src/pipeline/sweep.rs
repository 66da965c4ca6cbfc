use serde::{Deserialize, Serialize};

use crate::distributions::{crps_empirical, WeightedEmpirical};
use crate::error::{input, Error, Result};
use crate::models::{drf_fit, DrfConfig, DrfModel, FittedModel, KnnModel};
use crate::pipeline::Dataset;
use crate::risk_fit::empirical_risk;
use crate::rng;

/// Validation risk along a hyperparameter grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub parameter: String,
    pub best: usize,
    pub best_risk: f64,
    pub curve: Vec<(usize, f64)>,
}

impl SweepResult {
    fn from_curve(parameter: &str, curve: Vec<(usize, f64)>) -> Self {
        // First minimum wins, so ties go to the smallest grid value.
        let (best, best_risk) = curve
            .iter()
            .copied()
            .fold((0, f64::INFINITY), |acc, (p, r)| if r < acc.1 { (p, r) } else { acc });
        SweepResult {
            parameter: parameter.into(),
            best,
            best_risk,
            curve,
        }
    }
}

pub const DEFAULT_KMAX: usize = 50;

fn check_sets(train: &Dataset, val: &Dataset) -> Result<()> {
    if train.is_empty() || val.is_empty() {
        return input("training and validation sets must be nonempty");
    }
    if train.d() != val.d() {
        return input("training and validation covariate dimensions differ");
    }
    Ok(())
}

/// Validation CRPS of KNN for every `k` in the grid (default `1..=min(50, n)`).
pub fn sweep_knn(train: &Dataset, val: &Dataset, k_grid: Option<&[usize]>, standardize: bool) -> Result<SweepResult> {
    check_sets(train, val)?;
    let default: Vec<usize> = (1..=DEFAULT_KMAX.min(train.n())).collect();
    let mut grid = k_grid.map_or(default, <[usize]>::to_vec);
    grid.sort_unstable();
    grid.dedup();
    if grid.is_empty() || grid[0] == 0 || *grid.last().unwrap() > train.n() {
        return Err(Error::Config(format!("k grid must lie in 1..={}", train.n())));
    }
    let kmax = *grid.last().unwrap();
    let model = KnnModel::fit(train, kmax, standardize)?;
    let mut totals = vec![0.0; grid.len()];
    for (x, &y) in val.rows().zip(val.y()) {
        let nb = model.neighbors(x, kmax)?;
        let ys: Vec<f64> = nb.iter().map(|&i| model.train_y()[i]).collect();
        for (t, &k) in totals.iter_mut().zip(&grid) {
            *t += crps_empirical(&WeightedEmpirical::uniform(&ys[..k])?, y);
        }
    }
    let curve = grid
        .iter()
        .zip(totals)
        .map(|(&k, t)| (k, t / val.n() as f64))
        .collect();
    Ok(SweepResult::from_curve("k", curve))
}

const MTRY_STREAM: u64 = 0x4D;

/// Seed used for the forest with a given `mtry` inside a sweep.
pub fn forest_seed(seed: u64, mtry: usize) -> u64 {
    rng::child_seed(seed, &[MTRY_STREAM, mtry as u64])
}

/// Validation CRPS of the forest for every `mtry` in the grid (default `1..=d`),
/// also returning the forest fitted at the best value.
pub fn sweep_drf_models(
    train: &Dataset,
    val: &Dataset,
    mtry_grid: Option<&[usize]>,
    hyper: &DrfConfig,
    seed: u64,
) -> Result<(SweepResult, DrfModel)> {
    check_sets(train, val)?;
    let d = train.d();
    let mut grid = mtry_grid.map_or_else(|| (1..=d).collect(), <[usize]>::to_vec);
    grid.sort_unstable();
    grid.dedup();
    if grid.is_empty() || grid[0] == 0 || *grid.last().unwrap() > d {
        return Err(Error::Config(format!("mtry grid must lie in 1..={d}")));
    }
    let mut curve = Vec::with_capacity(grid.len());
    let mut best: Option<(f64, DrfModel)> = None;
    for &mtry in &grid {
        let cfg = DrfConfig {
            mtry: Some(mtry),
            seed: forest_seed(seed, mtry),
            ..hyper.clone()
        };
        let model = FittedModel::Drf(drf_fit(train, &cfg)?);
        let risk = empirical_risk(&model, val)?.value;
        curve.push((mtry, risk));
        if best.as_ref().is_none_or(|(r, _)| risk < *r) {
            let FittedModel::Drf(m) = model else { unreachable!() };
            best = Some((risk, m));
        }
    }
    let (_, model) = best.expect("nonempty grid");
    Ok((SweepResult::from_curve("mtry", curve), model))
}

pub fn sweep_drf(
    train: &Dataset,
    val: &Dataset,
    mtry_grid: Option<&[usize]>,
    hyper: &DrfConfig,
    seed: u64,
) -> Result<SweepResult> {
    sweep_drf_models(train, val, mtry_grid, hyper, seed).map(|(s, _)| s)
}
