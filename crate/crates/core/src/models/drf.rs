use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::check_dim;
use crate::distributions::WeightedEmpirical;
use crate::error::{input, Error, Result};
use crate::pipeline::Dataset;
use crate::rng;

/// Random forest hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DrfConfig {
    pub num_trees: usize,
    /// Candidate features per split; `None` means `ceil(d / 3)`.
    pub mtry: Option<usize>,
    pub sample_fraction: f64,
    pub min_node_size: usize,
    pub seed: u64,
}

impl Default for DrfConfig {
    fn default() -> Self {
        DrfConfig {
            num_trees: 500,
            mtry: None,
            sample_fraction: 0.9,
            min_node_size: 1,
            seed: 0,
        }
    }
}

impl DrfConfig {
    pub fn resolved_mtry(&self, d: usize) -> usize {
        self.mtry.unwrap_or_else(|| d.div_ceil(3).max(1))
    }
}

/// Tree node. Internal nodes send `x[feature] <= threshold` to `left`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: u32,
        right: u32,
    },
    /// Training indices (in-bag only) that fell into the leaf.
    Leaf { members: Vec<u32> },
}

/// A fitted tree; `nodes[0]` is the root.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
    /// Sorted training indices of the subsample the tree was grown on.
    pub in_bag: Vec<u32>,
}

impl Tree {
    pub fn leaf_for(&self, x: &[f64]) -> &[u32] {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[*feature] <= *threshold { *left } else { *right } as usize,
                Node::Leaf { members } => return members,
            }
        }
    }

    pub fn leaves(&self) -> impl Iterator<Item = &[u32]> {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf { members } => Some(members.as_slice()),
            Node::Split { .. } => None,
        })
    }
}

/// Quantile-regression-style forest: predictions weight training responses
/// by leaf co-membership.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DrfModel {
    pub config: DrfConfig,
    pub mtry: usize,
    d: usize,
    y: Vec<f64>,
    pub trees: Vec<Tree>,
}

impl DrfModel {
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn train_y(&self) -> &[f64] {
        &self.y
    }
}

const TREE_STREAM: u64 = 0x7AEE;

pub fn drf_fit(data: &Dataset, config: &DrfConfig) -> Result<DrfModel> {
    let n = data.n();
    let d = data.d();
    let mtry = config.resolved_mtry(d);
    if config.num_trees == 0 {
        return Err(Error::Config("num_trees must be positive".into()));
    }
    if config.min_node_size == 0 {
        return Err(Error::Config("min_node_size must be positive".into()));
    }
    if !(config.sample_fraction > 0.0 && config.sample_fraction <= 1.0) {
        return Err(Error::Config("sample_fraction must lie in (0, 1]".into()));
    }
    if d == 0 || mtry == 0 || mtry > d {
        return Err(Error::Config(format!("mtry = {mtry} must lie in 1..={d}")));
    }
    if n < 2 * config.min_node_size {
        return input(format!(
            "{n} training points is fewer than 2 * min_node_size = {}",
            2 * config.min_node_size
        ));
    }
    if n > u32::MAX as usize {
        return input("training set too large");
    }
    // The small offset keeps products like 0.9 * 60 from rounding up past the integer.
    let n_sub = ((config.sample_fraction * n as f64 - 1e-9).ceil() as usize).clamp(1, n);
    let grower = Grower {
        data,
        mtry,
        min_node_size: config.min_node_size,
    };
    let trees = (0..config.num_trees)
        .map(|b| {
            let mut r = rng::stream(config.seed, &[TREE_STREAM, b as u64]);
            let mut in_bag: Vec<u32> = sample(&mut r, n, n_sub).into_iter().map(|i| i as u32).collect();
            in_bag.sort_unstable();
            grower.grow(in_bag, &mut r)
        })
        .collect();
    Ok(DrfModel {
        config: config.clone(),
        mtry,
        d,
        y: data.y().to_vec(),
        trees,
    })
}

struct Grower<'a> {
    data: &'a Dataset,
    mtry: usize,
    min_node_size: usize,
}

struct Split {
    feature: usize,
    threshold: f64,
    /// Position within the node's range of the first right-going sample.
    cut: usize,
}

impl Grower<'_> {
    fn x(&self, i: u32, j: usize) -> f64 {
        self.data.row(i as usize)[j]
    }

    fn grow(&self, in_bag: Vec<u32>, r: &mut rng::StreamRng) -> Tree {
        let d = self.data.d();
        let m = in_bag.len();
        // One index list per feature, each sorted by that feature; every node
        // owns the same contiguous range in all of them.
        let mut order: Vec<Vec<u32>> = (0..d)
            .map(|j| {
                let mut o = in_bag.clone();
                o.sort_by(|&a, &b| self.x(a, j).total_cmp(&self.x(b, j)).then(a.cmp(&b)));
                o
            })
            .collect();
        let mut goes_left = vec![false; self.data.n()];
        let mut scratch = Vec::with_capacity(m);
        let mut nodes = vec![Node::Leaf { members: Vec::new() }];
        let mut stack = vec![(0usize, 0usize, m)];
        while let Some((id, lo, hi)) = stack.pop() {
            match self.best_split(&order, lo, hi, r) {
                None => {
                    let mut members = order[0][lo..hi].to_vec();
                    members.sort_unstable();
                    nodes[id] = Node::Leaf { members };
                }
                Some(split) => {
                    let mid = lo + split.cut;
                    for &i in &order[split.feature][lo..hi] {
                        goes_left[i as usize] = false;
                    }
                    for &i in &order[split.feature][lo..mid] {
                        goes_left[i as usize] = true;
                    }
                    for (j, o) in order.iter_mut().enumerate() {
                        if j == split.feature {
                            continue;
                        }
                        scratch.clear();
                        scratch.extend(o[lo..hi].iter().filter(|&&i| !goes_left[i as usize]));
                        let mut w = lo;
                        for k in lo..hi {
                            let i = o[k];
                            if goes_left[i as usize] {
                                o[w] = i;
                                w += 1;
                            }
                        }
                        o[w..hi].copy_from_slice(&scratch);
                    }
                    let left = nodes.len();
                    nodes.push(Node::Leaf { members: Vec::new() });
                    nodes.push(Node::Leaf { members: Vec::new() });
                    nodes[id] = Node::Split {
                        feature: split.feature,
                        threshold: split.threshold,
                        left: left as u32,
                        right: left as u32 + 1,
                    };
                    stack.push((left + 1, mid, hi));
                    stack.push((left, lo, mid));
                }
            }
        }
        Tree { nodes, in_bag }
    }

    fn best_split(&self, order: &[Vec<u32>], lo: usize, hi: usize, r: &mut rng::StreamRng) -> Option<Split> {
        let size = hi - lo;
        if size < 2 * self.min_node_size {
            return None;
        }
        let y = self.data.y();
        let members = &order[0][lo..hi];
        let (y_min, y_max) = members
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &i| {
                (a.min(y[i as usize]), b.max(y[i as usize]))
            });
        if y_min == y_max {
            return None;
        }
        let mean = members.iter().map(|&i| y[i as usize]).sum::<f64>() / size as f64;
        let total_ss: f64 = members.iter().map(|&i| (y[i as usize] - mean).powi(2)).sum();

        let mut features: Vec<usize> = sample(r, self.data.d(), self.mtry).into_vec();
        features.sort_unstable();

        // With centred responses the variance reduction of a cut with left sum
        // s is s^2 * size / (n_left * n_right).
        let mut best: Option<(f64, Split)> = None;
        for &j in &features {
            let o = &order[j][lo..hi];
            let mut s = 0.0;
            for pos in 1..size {
                s += y[o[pos - 1] as usize] - mean;
                if pos < self.min_node_size || size - pos < self.min_node_size {
                    continue;
                }
                let a = self.x(o[pos - 1], j);
                let b = self.x(o[pos], j);
                if a == b {
                    continue;
                }
                let gain = s * s * size as f64 / (pos as f64 * (size - pos) as f64);
                if best.as_ref().is_none_or(|(g, _)| gain > *g) {
                    let mid = a + 0.5 * (b - a);
                    let threshold = if mid < b { mid } else { a };
                    best = Some((
                        gain,
                        Split {
                            feature: j,
                            threshold,
                            cut: pos,
                        },
                    ));
                }
            }
        }
        best.filter(|(g, _)| *g > 1e-12 * total_ss).map(|(_, s)| s)
    }
}

/// Forest weights over training indices for covariate vector `x`.
pub fn drf_weights(m: &DrfModel, x: &[f64]) -> Result<Vec<f64>> {
    check_dim(x, m.d)?;
    let mut w = vec![0.0; m.y.len()];
    let per_tree = 1.0 / m.trees.len() as f64;
    for t in &m.trees {
        let leaf = t.leaf_for(x);
        let share = per_tree / leaf.len() as f64;
        for &i in leaf {
            w[i as usize] += share;
        }
    }
    Ok(w)
}

pub fn drf_predict(m: &DrfModel, x: &[f64]) -> Result<WeightedEmpirical> {
    let w = drf_weights(m, x)?;
    let (atoms, weights): (Vec<f64>, Vec<f64>) = m
        .y
        .iter()
        .zip(&w)
        .filter(|(_, w)| **w > 0.0)
        .map(|(y, w)| (*y, *w))
        .unzip();
    WeightedEmpirical::from_unnormalized(atoms, weights)
}
