//! Stratified train/test split with stratified folds over the training part.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    /// Ascending dataset row indices.
    pub train_indices: Vec<usize>,
    /// Ascending dataset row indices.
    pub test_indices: Vec<usize>,
    /// Fold id of each entry of `train_indices`.
    pub fold_of: Vec<usize>,
    pub k: usize,
    pub seed: u64,
    pub ratio: f64,
}

impl SplitPlan {
    /// Training rows outside fold `f`.
    pub fn fold_train(&self, f: usize) -> Vec<usize> {
        self.train_indices
            .iter()
            .zip(&self.fold_of)
            .filter(|(_, &g)| g != f)
            .map(|(&i, _)| i)
            .collect()
    }

    /// Training rows inside fold `f`.
    pub fn fold_holdout(&self, f: usize) -> Vec<usize> {
        self.train_indices
            .iter()
            .zip(&self.fold_of)
            .filter(|(_, &g)| g == f)
            .map(|(&i, _)| i)
            .collect()
    }
}

pub fn stratified_split(labels: &[u8], ratio: f64, k: usize, seed: u64) -> Result<SplitPlan> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::Split(format!(
            "train ratio {ratio} must lie in (0, 1]"
        )));
    }
    if k < 2 {
        return Err(Error::Split(format!("need at least 2 folds, got {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train: Vec<(usize, usize)> = Vec::new();
    let mut test = Vec::new();
    let mut counter = 0usize;
    for class in 0..=1u8 {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() < k {
            return Err(Error::Split(format!(
                "class {class} has {} rows, fewer than {k} folds",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        let n_test = ((members.len() as f64) * (1.0 - ratio)).round() as usize;
        let (held, rest) = members.split_at(n_test);
        if rest.len() < k {
            return Err(Error::Split(format!(
                "class {class} keeps {} training rows, fewer than {k} folds",
                rest.len()
            )));
        }
        test.extend_from_slice(held);
        for &i in rest {
            train.push((i, counter % k));
            counter += 1;
        }
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitPlan {
        train_indices: train.iter().map(|&(i, _)| i).collect(),
        fold_of: train.iter().map(|&(_, f)| f).collect(),
        test_indices: test,
        k,
        seed,
        ratio,
    })
}
