//! Shapley attributions under the interventional value function.
//!
//! `v(S)` is the mean model output over a background set when features in
//! `S` come from the explained row and the rest from each background row.
//! `exact_shapley` enumerates every coalition; `sampled_shapley` averages
//! marginal contributions along random feature orderings. Both treat the
//! model as a black box, so they apply to every family.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::evaluation::csv_field;
use crate::matrix::FeatureMatrix;
use crate::models::Predictor;

/// Largest feature subset `exact_shapley` will enumerate.
pub const MAX_EXACT_FEATURES: usize = 20;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ExplainError {
    #[error("exact enumeration supports at most {MAX_EXACT_FEATURES} features, got {0}")]
    TooManyFeatures(usize),
    #[error("feature index {0} out of range")]
    BadFeature(usize),
    #[error("unknown feature {0:?}")]
    UnknownFeature(String),
    #[error("background set is empty")]
    EmptyBackground,
    #[error("at least one permutation is required")]
    NoPermutations,
    #[error("no attributions to export")]
    Empty,
}

/// Reference rows, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Background {
    pub n_features: usize,
    pub data: Vec<f64>,
}

impl Background {
    pub fn new(n_features: usize, data: Vec<f64>) -> Result<Self, ExplainError> {
        if data.is_empty() || n_features == 0 || data.len() % n_features != 0 {
            return Err(ExplainError::EmptyBackground);
        }
        Ok(Self { n_features, data })
    }

    /// The first `size` rows of `train` after a seeded shuffle.
    pub fn sample(train: &FeatureMatrix, size: usize, seed: u64) -> Result<Self, ExplainError> {
        let mut idx: Vec<usize> = (0..train.n_rows()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        idx.truncate(size);
        idx.sort_unstable();
        Self::new(train.n_cols(), train.select_rows(&idx).data().to_vec())
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.n_features
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn column_mean(&self, j: usize) -> f64 {
        self.data.chunks(self.n_features).map(|r| r[j]).sum::<f64>() / self.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    Exact,
    Sampled { n_permutations: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttributionSet {
    /// One value per model feature; features not explained hold 0.
    pub phi: Vec<f64>,
    /// `v(∅)`: mean output over the background.
    pub baseline: f64,
    /// Model output at the explained row.
    pub prediction: f64,
    /// Features that received attribution.
    pub features: Vec<usize>,
    pub method: Method,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// `v(S)` for the coalition marked in `in_s` (indexed by feature).
pub fn value_function<P: Predictor + ?Sized>(model: &P, x: &[f64], in_s: &[bool], background: &Background) -> f64 {
    let mut rows = background.data.clone();
    for row in rows.chunks_mut(background.n_features) {
        for (j, v) in row.iter_mut().enumerate() {
            if in_s[j] {
                *v = x[j];
            }
        }
    }
    mean(&model.predict_rows(&rows))
}

/// `|S|! (M - |S| - 1)! / M!` for each `|S|` in `0..M`.
fn shapley_weights(m: usize) -> Vec<f64> {
    (0..m)
        .map(|s| {
            // 1 / (M * C(M-1, s))
            let mut c = 1.0f64;
            for i in 0..s {
                c = c * (m - 1 - i) as f64 / (i + 1) as f64;
            }
            1.0 / (m as f64 * c)
        })
        .collect()
}

/// Exact attribution over `features`. Features outside the list stay at
/// their `x` values in every evaluation and receive no attribution.
pub fn exact_shapley<P: Predictor + ?Sized>(
    model: &P,
    x: &[f64],
    background: &Background,
    features: &[usize],
) -> Result<AttributionSet, ExplainError> {
    let width = model.n_features();
    let m = features.len();
    if m > MAX_EXACT_FEATURES {
        return Err(ExplainError::TooManyFeatures(m));
    }
    if let Some(&bad) = features.iter().find(|&&f| f >= width) {
        return Err(ExplainError::BadFeature(bad));
    }
    if background.is_empty() {
        return Err(ExplainError::EmptyBackground);
    }
    let full = (1usize << m) - 1;
    let values: Vec<f64> = (0..=full)
        .map(|mask| {
            let mut in_s = vec![true; width];
            for (k, &f) in features.iter().enumerate() {
                in_s[f] = mask & (1 << k) != 0;
            }
            value_function(model, x, &in_s, background)
        })
        .collect();
    let w = shapley_weights(m);
    let mut phi = vec![0.0; width];
    for (k, &f) in features.iter().enumerate() {
        let bit = 1 << k;
        let mut acc = 0.0;
        for mask in 0..=full {
            if mask & bit == 0 {
                acc += w[mask.count_ones() as usize] * (values[mask | bit] - values[mask]);
            }
        }
        phi[f] = acc;
    }
    Ok(AttributionSet { phi, baseline: values[0], prediction: model.predict_row(x), features: features.to_vec(), method: Method::Exact })
}

fn sampled_with_rng<P: Predictor + ?Sized>(
    model: &P,
    x: &[f64],
    background: &Background,
    n_permutations: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<f64>, f64, f64) {
    let width = model.n_features();
    let baseline = mean(&model.predict_rows(&background.data));
    let prediction = model.predict_row(x);
    let mut phi = vec![0.0; width];
    let mut order: Vec<usize> = (0..width).collect();
    let mut rows = background.data.clone();
    for _ in 0..n_permutations {
        order.sort_unstable();
        order.shuffle(rng);
        rows.copy_from_slice(&background.data);
        let mut prev = baseline;
        for (step, &j) in order.iter().enumerate() {
            let mut changed = false;
            for row in rows.chunks_mut(width) {
                if row[j] != x[j] {
                    row[j] = x[j];
                    changed = true;
                }
            }
            let cur = if step + 1 == width {
                prediction
            } else if changed {
                mean(&model.predict_rows(&rows))
            } else {
                prev
            };
            phi[j] += cur - prev;
            prev = cur;
        }
    }
    for p in &mut phi {
        *p /= n_permutations as f64;
    }
    (phi, baseline, prediction)
}

/// Permutation-sampling estimate over all features. Deterministic for a
/// fixed `(seed, n_permutations)`.
pub fn sampled_shapley<P: Predictor + ?Sized>(
    model: &P,
    x: &[f64],
    background: &Background,
    n_permutations: usize,
    seed: u64,
) -> Result<AttributionSet, ExplainError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sampled_stream(model, x, background, n_permutations, seed, &mut rng)
}

fn sampled_stream<P: Predictor + ?Sized>(
    model: &P,
    x: &[f64],
    background: &Background,
    n_permutations: usize,
    seed: u64,
    rng: &mut ChaCha8Rng,
) -> Result<AttributionSet, ExplainError> {
    if n_permutations == 0 {
        return Err(ExplainError::NoPermutations);
    }
    if background.is_empty() {
        return Err(ExplainError::EmptyBackground);
    }
    let (phi, baseline, prediction) = sampled_with_rng(model, x, background, n_permutations, rng);
    Ok(AttributionSet {
        features: (0..phi.len()).collect(),
        phi,
        baseline,
        prediction,
        method: Method::Sampled { n_permutations, seed },
    })
}

/// Sampled attributions for every row of `rows`, in parallel. Row `i` draws
/// its permutations from stream `i` of the seed, so results do not depend
/// on scheduling; row 0 equals `sampled_shapley` with the same seed.
pub fn explain_rows<P: Predictor + ?Sized>(
    model: &P,
    rows: &FeatureMatrix,
    background: &Background,
    n_permutations: usize,
    seed: u64,
) -> Result<Vec<AttributionSet>, ExplainError> {
    (0..rows.n_rows())
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            sampled_stream(model, rows.row(i), background, n_permutations, seed, &mut rng)
        })
        .collect()
}

/// Attributions for a set of rows with the explained feature values.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapTable {
    pub columns: Vec<String>,
    /// Feature values, row-major.
    pub values: Vec<f64>,
    /// Attributions, row-major, aligned with `values`.
    pub phi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Importance {
    pub feature: String,
    pub mean_abs_phi: f64,
}

impl ShapTable {
    pub fn new(rows: &FeatureMatrix, attributions: &[AttributionSet]) -> Result<Self, ExplainError> {
        if attributions.is_empty() {
            return Err(ExplainError::Empty);
        }
        assert_eq!(rows.n_rows(), attributions.len(), "one attribution per row");
        Ok(Self {
            columns: rows.columns().to_vec(),
            values: rows.data().to_vec(),
            phi: attributions.iter().flat_map(|a| a.phi.iter().copied()).collect(),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.phi.len() / self.columns.len()
    }

    fn column(&self, name: &str) -> Result<usize, ExplainError> {
        self.columns.iter().position(|c| c == name).ok_or_else(|| ExplainError::UnknownFeature(name.into()))
    }

    /// Features by mean |φ|, largest first; ties keep column order.
    pub fn importance(&self) -> Vec<Importance> {
        let w = self.columns.len();
        let n = self.n_rows() as f64;
        let mut imp: Vec<Importance> = self
            .columns
            .iter()
            .enumerate()
            .map(|(j, c)| Importance {
                feature: c.clone(),
                mean_abs_phi: self.phi.chunks(w).map(|r| r[j].abs()).sum::<f64>() / n,
            })
            .collect();
        imp.sort_by(|a, b| b.mean_abs_phi.total_cmp(&a.mean_abs_phi));
        imp
    }

    pub fn importance_csv(&self) -> String {
        let mut s = String::from("rank,feature,mean_abs_phi\n");
        for (i, imp) in self.importance().iter().enumerate() {
            s.push_str(&format!("{},{},{}\n", i + 1, csv_field(&imp.feature), imp.mean_abs_phi));
        }
        s
    }

    /// Long format: one line per (row, feature).
    pub fn summary_csv(&self) -> String {
        let w = self.columns.len();
        let mut s = String::from("row,feature,feature_value,phi\n");
        for i in 0..self.n_rows() {
            for (j, c) in self.columns.iter().enumerate() {
                s.push_str(&format!("{},{},{},{}\n", i, csv_field(c), self.values[i * w + j], self.phi[i * w + j]));
            }
        }
        s
    }

    pub fn dependence(&self, feature: &str, color: &str) -> Result<Vec<[f64; 3]>, ExplainError> {
        let f = self.column(feature)?;
        let c = self.column(color)?;
        let w = self.columns.len();
        Ok((0..self.n_rows()).map(|i| [self.values[i * w + f], self.phi[i * w + f], self.values[i * w + c]]).collect())
    }

    pub fn dependence_csv(&self, feature: &str, color: &str) -> Result<String, ExplainError> {
        let mut s = String::from("feature_value,phi,color_value\n");
        for [v, p, c] in self.dependence(feature, color)? {
            s.push_str(&format!("{v},{p},{c}\n"));
        }
        Ok(s)
    }
}
