use serde::{Deserialize, Serialize};

use super::check_dim;
use crate::distributions::WeightedEmpirical;
use crate::error::{input, Result};
use crate::pipeline::Dataset;

/// Distributional k-nearest-neighbours: the empirical distribution of the
/// responses of the `k` closest training points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    k: usize,
    d: usize,
    x: Vec<f64>,
    y: Vec<f64>,
    /// Per-feature `(mean, sd)` used to standardize, when enabled.
    scaling: Option<Vec<(f64, f64)>>,
}

impl KnnModel {
    pub fn fit(train: &Dataset, k: usize, standardize: bool) -> Result<Self> {
        let n = train.n();
        if k == 0 || k > n {
            return input(format!("k = {k} must lie in 1..={n}"));
        }
        let d = train.d();
        let scaling = standardize.then(|| {
            (0..d)
                .map(|j| {
                    let col: Vec<f64> = train.rows().map(|r| r[j]).collect();
                    let mean = col.iter().sum::<f64>() / n as f64;
                    let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
                    let sd = var.sqrt();
                    (mean, if sd > 0.0 { sd } else { 1.0 })
                })
                .collect::<Vec<_>>()
        });
        let mut x = train.x_flat().to_vec();
        if let Some(s) = &scaling {
            for row in x.chunks_exact_mut(d.max(1)) {
                for (v, (m, sd)) in row.iter_mut().zip(s) {
                    *v = (*v - m) / sd;
                }
            }
        }
        Ok(KnnModel {
            k,
            d,
            x,
            y: train.y().to_vec(),
            scaling,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn train_y(&self) -> &[f64] {
        &self.y
    }

    /// Same training set, different `k`.
    pub fn with_k(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.n() {
            return input(format!("k = {k} must lie in 1..={}", self.n()));
        }
        Ok(KnnModel { k, ..self.clone() })
    }

    /// Indices of the `count` nearest training points, nearest first; equal
    /// distances are ordered by training index.
    pub fn neighbors(&self, x: &[f64], count: usize) -> Result<Vec<usize>> {
        check_dim(x, self.d)?;
        let count = count.min(self.n());
        let q: Vec<f64> = match &self.scaling {
            Some(s) => x.iter().zip(s).map(|(v, (m, sd))| (v - m) / sd).collect(),
            None => x.to_vec(),
        };
        let mut dist: Vec<(f64, usize)> = (0..self.n())
            .map(|i| {
                let row = &self.x[i * self.d..(i + 1) * self.d];
                (row.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum(), i)
            })
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if count > 0 && count < dist.len() {
            dist.select_nth_unstable_by(count - 1, cmp);
            dist.truncate(count);
        }
        dist.sort_unstable_by(cmp);
        Ok(dist.into_iter().map(|(_, i)| i).collect())
    }

    /// Predictive distribution from a precomputed neighbour list.
    pub fn predict_from_neighbors(&self, neighbors: &[usize]) -> Result<WeightedEmpirical> {
        let ys: Vec<f64> = neighbors.iter().map(|&i| self.y[i]).collect();
        WeightedEmpirical::uniform(&ys)
    }
}

pub fn knn_predict(m: &KnnModel, x: &[f64]) -> Result<WeightedEmpirical> {
    let nb = m.neighbors(x, m.k)?;
    m.predict_from_neighbors(&nb)
}
