//! Nine regression families behind one fit/predict contract.
//!
//! Linear, ridge, OMP and kNN standardize features internally with training
//! statistics; the tree families consume raw features.

mod ensemble;
mod io;
mod knn;
mod leaderboard;
mod linear;
mod tree;

use serde::{Deserialize, Serialize};

use crate::matrix::{schema_hash, FeatureMatrix};

pub use ensemble::Boosted;
pub use io::{read_model, write_model, FORMAT_VERSION, MAGIC};
pub use knn::KnnModel;
pub use leaderboard::{leaderboard_csv, train_all, LeaderboardRow, TrainedModel};
pub use linear::{fit_least_squares, fit_omp, fit_ridge, LinearModel, Standardizer};
pub use tree::{Node, Tree};

use ensemble::{fit_forest, fit_gbm, forest_predict, forest_predict_rows, ForestConfig};
use tree::{Columns, GrowConfig, Splitter};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid {family} spec: {msg}")]
    InvalidSpec { family: &'static str, msg: String },
    #[error("{family} needs at least {need} training rows, got {got}")]
    TooFewRows { family: &'static str, need: usize, got: usize },
    #[error("feature matrix has {rows} rows but target has {targets} values")]
    ShapeMismatch { rows: usize, targets: usize },
    #[error("training data contains a non-finite value")]
    NonFinite,
    #[error("input schema {found} differs from training schema {expected}")]
    SchemaMismatch { expected: String, found: String },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RidgeParams {
    pub alpha: f64,
}

impl Default for RidgeParams {
    fn default() -> Self {
        Self { alpha: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OmpParams {
    pub n_nonzero: usize,
}

impl Default for OmpParams {
    fn default() -> Self {
        Self { n_nonzero: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KnnParams {
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        Self { k: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub min_samples_split: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self { max_depth: None, min_samples_leaf: 1, min_samples_split: 2 }
    }
}

/// Shared by `forest` and `extra_trees`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Candidate features per split; `None` means `⌈M/3⌉`.
    pub max_features: Option<usize>,
    /// `None` bags for `forest` and not for `extra_trees`.
    pub bootstrap: Option<bool>,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self { n_trees: 200, max_depth: None, min_samples_leaf: 2, max_features: None, bootstrap: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbmParams {
    pub n_trees: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

impl Default for GbmParams {
    fn default() -> Self {
        Self { n_trees: 300, learning_rate: 0.1, max_depth: 3, min_samples_leaf: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelKind {
    Dummy,
    Linear,
    Ridge(RidgeParams),
    Omp(OmpParams),
    Knn(KnnParams),
    Tree(TreeParams),
    Forest(ForestParams),
    ExtraTrees(ForestParams),
    Gbm(GbmParams),
}

impl ModelKind {
    pub const FAMILIES: [&'static str; 9] =
        ["dummy", "linear", "ridge", "omp", "knn", "tree", "forest", "extra_trees", "gbm"];

    pub fn family(&self) -> &'static str {
        match self {
            ModelKind::Dummy => "dummy",
            ModelKind::Linear => "linear",
            ModelKind::Ridge(_) => "ridge",
            ModelKind::Omp(_) => "omp",
            ModelKind::Knn(_) => "knn",
            ModelKind::Tree(_) => "tree",
            ModelKind::Forest(_) => "forest",
            ModelKind::ExtraTrees(_) => "extra_trees",
            ModelKind::Gbm(_) => "gbm",
        }
    }

    /// Default hyperparameters for a family name.
    pub fn default_for(family: &str) -> Option<ModelKind> {
        Some(match family {
            "dummy" => ModelKind::Dummy,
            "linear" => ModelKind::Linear,
            "ridge" => ModelKind::Ridge(RidgeParams::default()),
            "omp" => ModelKind::Omp(OmpParams::default()),
            "knn" => ModelKind::Knn(KnnParams::default()),
            "tree" => ModelKind::Tree(TreeParams::default()),
            "forest" => ModelKind::Forest(ForestParams::default()),
            "extra_trees" => ModelKind::ExtraTrees(ForestParams::default()),
            "gbm" => ModelKind::Gbm(GbmParams::default()),
            _ => return None,
        })
    }
}

/// A family with its hyperparameters, an optional display name and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(flatten)]
    pub kind: ModelKind,
}

impl ModelSpec {
    pub fn new(kind: ModelKind) -> Self {
        Self { name: None, seed: None, kind }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn family(&self) -> &'static str {
        self.kind.family()
    }

    /// Display name; defaults to the family.
    pub fn label(&self) -> &str {
        self.name.as_deref().unwrap_or(self.kind.family())
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let family = self.family();
        let bad = |msg: &str| Err(ModelError::InvalidSpec { family, msg: msg.into() });
        match &self.kind {
            ModelKind::Dummy | ModelKind::Linear => Ok(()),
            ModelKind::Ridge(p) if !(p.alpha >= 0.0 && p.alpha.is_finite()) => bad("alpha must be finite and >= 0"),
            ModelKind::Omp(p) if p.n_nonzero == 0 => bad("n_nonzero must be >= 1"),
            ModelKind::Knn(p) if p.k == 0 => bad("k must be >= 1"),
            ModelKind::Tree(p) if p.min_samples_leaf == 0 => bad("min_samples_leaf must be >= 1"),
            ModelKind::Tree(p) if p.min_samples_split < 2 => bad("min_samples_split must be >= 2"),
            ModelKind::Forest(p) | ModelKind::ExtraTrees(p) => {
                if p.n_trees == 0 {
                    bad("n_trees must be >= 1")
                } else if p.min_samples_leaf == 0 {
                    bad("min_samples_leaf must be >= 1")
                } else if p.max_features == Some(0) {
                    bad("max_features must be >= 1")
                } else {
                    Ok(())
                }
            }
            ModelKind::Gbm(p) => {
                if p.n_trees == 0 {
                    bad("n_trees must be >= 1")
                } else if !(p.learning_rate > 0.0 && p.learning_rate <= 1.0) {
                    bad("learning_rate must be in (0, 1]")
                } else if p.max_depth == 0 {
                    bad("max_depth must be >= 1")
                } else if p.min_samples_leaf == 0 {
                    bad("min_samples_leaf must be >= 1")
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    fn min_rows(&self) -> usize {
        match &self.kind {
            ModelKind::Knn(p) => p.k,
            _ => 1,
        }
    }
}

/// Learned state, one variant per model shape.
#[derive(Debug, Clone, PartialEq)]
pub enum Learned {
    Constant(f64),
    Linear(LinearModel),
    Knn(KnnModel),
    Tree(Tree),
    /// Averaged trees (forest, extra_trees).
    Forest(Vec<Tree>),
    Boosted(Boosted),
}

/// Row-level prediction without schema checks; what the explainers consume.
pub trait Predictor: Sync {
    fn n_features(&self) -> usize;

    fn predict_row(&self, row: &[f64]) -> f64;

    /// Predicts a row-major block of rows.
    fn predict_rows(&self, data: &[f64]) -> Vec<f64> {
        let w = self.n_features();
        if w == 0 {
            return Vec::new();
        }
        data.chunks(w).map(|r| self.predict_row(r)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub spec: ModelSpec,
    pub columns: Vec<String>,
    pub schema_hash: String,
    pub learned: Learned,
}

impl FittedModel {
    pub fn family(&self) -> &'static str {
        self.spec.family()
    }

    /// Predicts every row of `x`, which must carry the training columns.
    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<f64>, ModelError> {
        let found = x.schema_hash();
        if found != self.schema_hash {
            return Err(ModelError::SchemaMismatch { expected: self.schema_hash.clone(), found });
        }
        Ok(self.predict_rows(x.data()))
    }
}

impl Predictor for FittedModel {
    fn n_features(&self) -> usize {
        self.columns.len()
    }

    fn predict_row(&self, row: &[f64]) -> f64 {
        match &self.learned {
            Learned::Constant(c) => *c,
            Learned::Linear(m) => m.predict_row(row),
            Learned::Knn(m) => m.predict_row(row),
            Learned::Tree(t) => t.predict_row(row),
            Learned::Forest(trees) => forest_predict(trees, row),
            Learned::Boosted(b) => b.predict_row(row),
        }
    }

    fn predict_rows(&self, data: &[f64]) -> Vec<f64> {
        let w = self.columns.len();
        if w == 0 {
            return Vec::new();
        }
        match &self.learned {
            Learned::Forest(trees) => forest_predict_rows(trees, data, w),
            Learned::Boosted(b) => b.predict_rows(data, w),
            _ => data.chunks(w).map(|r| self.predict_row(r)).collect(),
        }
    }
}

/// Trains `spec` on `x`/`y`. The seed defaults to 0 when the spec has none.
pub fn fit(spec: &ModelSpec, x: &FeatureMatrix, y: &[f64]) -> Result<FittedModel, ModelError> {
    spec.validate()?;
    let family = spec.family();
    if x.n_rows() != y.len() {
        return Err(ModelError::ShapeMismatch { rows: x.n_rows(), targets: y.len() });
    }
    let need = spec.min_rows();
    if y.len() < need {
        return Err(ModelError::TooFewRows { family, need, got: y.len() });
    }
    if x.data().iter().chain(y).any(|v| !v.is_finite()) {
        return Err(ModelError::NonFinite);
    }
    let m = x.n_cols();
    let data = x.data();
    let seed = spec.seed.unwrap_or(0);
    let learned = match &spec.kind {
        ModelKind::Dummy => Learned::Constant(y.iter().sum::<f64>() / y.len() as f64),
        ModelKind::Linear => Learned::Linear(fit_least_squares(data, m, y)?),
        ModelKind::Ridge(p) => Learned::Linear(fit_ridge(data, m, y, p.alpha)?),
        ModelKind::Omp(p) => Learned::Linear(fit_omp(data, m, y, p.n_nonzero)?),
        ModelKind::Knn(p) => Learned::Knn(KnnModel::fit(data, m, y, p.k)),
        ModelKind::Tree(p) => {
            let cfg = GrowConfig {
                max_depth: p.max_depth,
                min_samples_leaf: p.min_samples_leaf,
                min_samples_split: p.min_samples_split,
                max_features: m,
                splitter: Splitter::Best,
            };
            let mut rng = ensemble::member_rng(seed, 0);
            Learned::Tree(tree::grow_tree(&Columns::new(data, m, true), y, None, &cfg, &mut rng))
        }
        ModelKind::Forest(p) | ModelKind::ExtraTrees(p) => {
            let extra = matches!(spec.kind, ModelKind::ExtraTrees(_));
            let cfg = ForestConfig {
                n_trees: p.n_trees,
                bootstrap: p.bootstrap.unwrap_or(!extra),
                grow: GrowConfig {
                    max_depth: p.max_depth,
                    min_samples_leaf: p.min_samples_leaf,
                    min_samples_split: 2,
                    max_features: p.max_features.unwrap_or(m.div_ceil(3)),
                    splitter: if extra { Splitter::Random } else { Splitter::Best },
                },
            };
            Learned::Forest(fit_forest(data, m, y, &cfg, seed))
        }
        ModelKind::Gbm(p) => {
            let grow = GrowConfig {
                max_depth: Some(p.max_depth),
                min_samples_leaf: p.min_samples_leaf,
                min_samples_split: 2,
                max_features: m,
                splitter: Splitter::Best,
            };
            Learned::Boosted(fit_gbm(data, m, y, p.n_trees, p.learning_rate, &grow, seed))
        }
    };
    Ok(FittedModel { spec: spec.clone(), columns: x.columns().to_vec(), schema_hash: schema_hash(x.columns()), learned })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_specs() -> Vec<ModelSpec> {
        ModelKind::FAMILIES.iter().map(|f| ModelSpec::new(ModelKind::default_for(f).unwrap()).with_seed(1)).collect()
    }

    #[test]
    fn constant_target_everywhere() {
        let x = FeatureMatrix::unnamed(2, (0..40).map(|i| (i * 7 % 11) as f64).collect());
        let y = vec![3.1; 20];
        for spec in all_specs() {
            let m = fit(&spec, &x, &y).unwrap();
            for row in [[0.0, 0.0], [100.0, -50.0], [3.0, 4.0]] {
                let p = m.predict_row(&row);
                assert!((p - 3.1).abs() < 1e-9, "{} predicted {p}", spec.family());
            }
        }
    }

    #[test]
    fn dummy_predicts_mean() {
        let x = FeatureMatrix::unnamed(1, vec![1.0, 2.0, 3.0, 4.0]);
        let m = fit(&ModelSpec::new(ModelKind::Dummy), &x, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m.predict(&x).unwrap(), vec![2.5; 4]);
    }

    #[test]
    fn schema_mismatch_is_rejected() {
        let x = FeatureMatrix::new(vec!["a".into()], vec![1.0, 2.0]);
        let m = fit(&ModelSpec::new(ModelKind::Linear), &x, &[1.0, 2.0]).unwrap();
        let other = FeatureMatrix::new(vec!["b".into()], vec![1.0]);
        assert!(matches!(m.predict(&other), Err(ModelError::SchemaMismatch { .. })));
    }

    #[test]
    fn invalid_specs() {
        let gbm = ModelSpec::new(ModelKind::Gbm(GbmParams { learning_rate: 1.5, ..Default::default() }));
        assert!(gbm.validate().is_err());
        let knn = ModelSpec::new(ModelKind::Knn(KnnParams { k: 0 }));
        assert!(knn.validate().is_err());
        let x = FeatureMatrix::unnamed(1, vec![1.0, 2.0]);
        let knn = ModelSpec::new(ModelKind::Knn(KnnParams { k: 5 }));
        assert!(matches!(fit(&knn, &x, &[1.0, 2.0]), Err(ModelError::TooFewRows { need: 5, .. })));
        let x = FeatureMatrix::unnamed(1, vec![f64::NAN]);
        assert!(matches!(fit(&ModelSpec::new(ModelKind::Dummy), &x, &[1.0]), Err(ModelError::NonFinite)));
    }

    #[test]
    fn spec_toml_round_trip() {
        let text = "family = \"forest\"\nn_trees = 10\nseed = 4\nname = \"rf\"\n";
        let spec: ModelSpec = toml::from_str(text).unwrap();
        assert_eq!(spec.label(), "rf");
        assert_eq!(spec.seed, Some(4));
        let ModelKind::Forest(p) = &spec.kind else { panic!() };
        assert_eq!((p.n_trees, p.min_samples_leaf), (10, 2));
        let plain: ModelSpec = toml::from_str("family = \"dummy\"").unwrap();
        assert_eq!(plain.kind, ModelKind::Dummy);
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(serde_json::from_str::<ModelSpec>(&json).unwrap(), spec);
    }

    #[test]
    fn omp_picks_the_signal_feature() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let mut data = Vec::new();
        let mut y = Vec::new();
        for _ in 0..200 {
            let row: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
            y.push(5.0 * row[3] + 0.1 * rng.random_range(-1.0..1.0));
            data.extend(row);
        }
        let x = FeatureMatrix::unnamed(10, data);
        let m = fit(&ModelSpec::new(ModelKind::Omp(OmpParams { n_nonzero: 1 })), &x, &y).unwrap();
        let Learned::Linear(lin) = &m.learned else { panic!() };
        assert_eq!(lin.selected, vec![3]);
    }

    #[test]
    fn batch_prediction_matches_rows_bitwise() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let data: Vec<f64> = (0..300).map(|_| rng.random_range(-2.0..2.0)).collect();
        let y: Vec<f64> = data.chunks(3).map(|r| r[0] * r[1] + r[2]).collect();
        let x = FeatureMatrix::unnamed(3, data);
        for spec in all_specs() {
            let m = fit(&spec, &x, &y).unwrap();
            let batch = m.predict_rows(x.data());
            let single: Vec<f64> = x.rows().map(|r| m.predict_row(r)).collect();
            assert_eq!(batch.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), single.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), "{}", spec.family());
        }
    }
}
