//! Bagged forests, extremely randomized trees and gradient boosting.
//!
//! Tree `i` of a forest draws from `ChaCha8Rng::seed_from_u64(seed)` on
//! stream `i + 1`, so every member is reproducible no matter which thread
//! grows it. Boosting is sequential and uses stream 0.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::tree::{grow_tree, Columns, GrowConfig, Splitter, Tree};

pub(crate) fn member_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct ForestConfig {
    pub n_trees: usize,
    pub bootstrap: bool,
    pub grow: GrowConfig,
}

/// Unweighted average of independently grown trees.
pub(crate) fn fit_forest(data: &[f64], n_cols: usize, y: &[f64], cfg: &ForestConfig, seed: u64) -> Vec<Tree> {
    let columns = Columns::new(data, n_cols, cfg.grow.splitter == Splitter::Best);
    let n = y.len();
    (0..cfg.n_trees)
        .into_par_iter()
        .map(|i| {
            let mut rng = member_rng(seed, i);
            let counts = cfg.bootstrap.then(|| {
                let mut c = vec![0u32; n];
                for _ in 0..n {
                    c[rng.random_range(0..n)] += 1;
                }
                c
            });
            grow_tree(&columns, y, counts.as_deref(), &cfg.grow, &mut rng)
        })
        .collect()
}

pub(crate) fn forest_predict(trees: &[Tree], row: &[f64]) -> f64 {
    trees.iter().map(|t| t.predict_row(row)).sum::<f64>() / trees.len() as f64
}

/// Tree-major batch form of [`forest_predict`]; same summation order per row.
pub(crate) fn forest_predict_rows(trees: &[Tree], data: &[f64], width: usize) -> Vec<f64> {
    let mut acc = vec![-0.0; data.len() / width];
    for t in trees {
        t.accumulate(data, width, 1.0, &mut acc);
    }
    let n = trees.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}

#[derive(Debug, Clone, PartialEq)]
pub struct Boosted {
    pub init: f64,
    pub learning_rate: f64,
    pub trees: Vec<Tree>,
}

impl Boosted {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.init + self.trees.iter().map(|t| self.learning_rate * t.predict_row(row)).sum::<f64>()
    }

    /// Tree-major batch form of [`Boosted::predict_row`]; same summation order per row.
    pub fn predict_rows(&self, data: &[f64], width: usize) -> Vec<f64> {
        let mut acc = vec![-0.0; data.len() / width];
        for t in &self.trees {
            t.accumulate(data, width, self.learning_rate, &mut acc);
        }
        acc.iter_mut().for_each(|a| *a += self.init);
        acc
    }
}

/// Squared-loss boosting: start at the training mean, then fit each tree to
/// the current residuals and add it with shrinkage.
pub(crate) fn fit_gbm(
    data: &[f64],
    n_cols: usize,
    y: &[f64],
    n_trees: usize,
    learning_rate: f64,
    grow: &GrowConfig,
    seed: u64,
) -> Boosted {
    let columns = Columns::new(data, n_cols, grow.splitter == Splitter::Best);
    let init = y.iter().sum::<f64>() / y.len() as f64;
    let mut pred = vec![init; y.len()];
    let mut residual = vec![0.0; y.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trees = Vec::with_capacity(n_trees);
    for _ in 0..n_trees {
        for ((r, t), p) in residual.iter_mut().zip(y).zip(&pred) {
            *r = t - p;
        }
        let tree = grow_tree(&columns, &residual, None, grow, &mut rng);
        for (i, p) in pred.iter_mut().enumerate() {
            let row = &data[i * n_cols..(i + 1) * n_cols];
            *p += learning_rate * tree.predict_row(row);
        }
        trees.push(tree);
    }
    Boosted { init, learning_rate, trees }
}
