use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Train / validation / test partition of `0..n`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub seed: u64,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitPlan {
    /// Train and validation indices together, for the refit stage.
    pub fn train_val(&self) -> Vec<usize> {
        self.train.iter().chain(&self.val).copied().collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        SplitFractions { train: 0.5, val: 0.2 }
    }
}

const SPLIT_STREAM: u64 = 0x5B;

/// Shuffles `0..n` and cuts it at `floor(train n)` and `floor((train + val) n)`,
/// so every part is within one row of its exact share.
pub fn make_splits(n: usize, fractions: SplitFractions, seed: u64) -> Result<SplitPlan> {
    let SplitFractions { train, val } = fractions;
    if !(train > 0.0 && val >= 0.0 && train + val <= 1.0) {
        return Err(Error::Config(format!("invalid split fractions {train} / {val}")));
    }
    // The offset keeps products such as 0.2 * 546 from landing a hair below an integer.
    let n_train = (train * n as f64 + 1e-9).floor() as usize;
    let n_val = ((train + val) * n as f64 + 1e-9).floor() as usize - n_train;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::stream(seed, &[SPLIT_STREAM]));
    let test = idx.split_off(n_train + n_val);
    let val_part = idx.split_off(n_train);
    Ok(SplitPlan {
        seed,
        train: idx,
        val: val_part,
        test,
    })
}
