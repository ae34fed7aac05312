//! Run configuration: a TOML file plus `YIELDCAST_*` environment overrides.
//!
//! An override names a key path with `__` between levels, for example
//! `YIELDCAST_SEED=7` or `YIELDCAST_SHAP__ROWS=20`. Values are parsed as
//! TOML literals when possible and taken as strings otherwise. Relative
//! paths resolve against the directory holding the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{OutlierScope, YieldColumns, YieldFilter, DEFAULT_MONTHS, DEFAULT_VARIABLES};
use crate::geodata::NameKeys;
use crate::matching::DEFAULT_THRESHOLD;
use crate::models::{ModelKind, ModelSpec};

pub const ENV_PREFIX: &str = "YIELDCAST_";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentMode {
    AllFeatures,
    EoOnly,
    #[default]
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    /// Root of `<var>/<year>/<MM>.asc` (or `<var>/<year>/<MM>/<DD>.asc`).
    pub rasters: PathBuf,
    pub districts: PathBuf,
    pub yields: PathBuf,
    #[serde(default)]
    pub crop_mask: Option<PathBuf>,
    /// CSV of `alias,canonical` district names.
    #[serde(default)]
    pub aliases: Option<PathBuf>,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

fn default_output() -> PathBuf {
    PathBuf::from("run")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaskConfig {
    /// Variables whose grids are masked before zonal averaging.
    pub variables: Vec<String>,
    /// Mask cells with a value at or below this are dropped.
    pub min_area: f64,
}

impl Default for MaskConfig {
    fn default() -> Self {
        Self { variables: vec!["ndvi".into()], min_area: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShapConfig {
    pub enabled: bool,
    pub permutations: usize,
    /// Background rows drawn from the training split.
    pub background: usize,
    /// Test rows explained; 0 explains all of them.
    pub rows: usize,
    pub dependence_feature: String,
    pub color_feature: String,
}

impl Default for ShapConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            permutations: 256,
            background: 64,
            rows: 0,
            dependence_feature: "t2m_aug".into(),
            color_feature: "lai_aug".into(),
        }
    }
}

fn default_models() -> Vec<ModelSpec> {
    ModelKind::FAMILIES.iter().map(|f| ModelSpec::new(ModelKind::default_for(f).expect("known family"))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub paths: Paths,
    #[serde(default = "default_season")]
    pub season: String,
    #[serde(default)]
    pub crop: Option<String>,
    #[serde(default = "default_min_year")]
    pub min_year: i32,
    #[serde(default = "default_max_year")]
    pub max_year: i32,
    #[serde(default = "default_months")]
    pub months: Vec<u32>,
    #[serde(default = "default_variables")]
    pub variables: Vec<String>,
    /// Harvest year `Y` uses rasters from calendar year `Y - offset`.
    #[serde(default)]
    pub sowing_year_offset: i32,
    #[serde(default = "default_last_train_year")]
    pub last_train_year: i32,
    #[serde(default)]
    pub experiment: ExperimentMode,
    #[serde(default = "default_threshold")]
    pub match_threshold: u32,
    #[serde(default = "default_outlier_k")]
    pub outlier_k: f64,
    #[serde(default)]
    pub outlier_scope: OutlierScope,
    #[serde(default)]
    pub names: NameKeys,
    #[serde(default)]
    pub yield_columns: YieldColumns,
    #[serde(default)]
    pub mask: MaskConfig,
    #[serde(default)]
    pub shap: ShapConfig,
    #[serde(default = "default_models")]
    pub models: Vec<ModelSpec>,
    /// Directory relative paths resolve against; set by the loader.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_seed() -> u64 {
    42
}
fn default_season() -> String {
    "kharif".into()
}
fn default_min_year() -> i32 {
    YieldFilter::default().min_year
}
fn default_max_year() -> i32 {
    YieldFilter::default().max_year
}
fn default_months() -> Vec<u32> {
    DEFAULT_MONTHS.to_vec()
}
fn default_variables() -> Vec<String> {
    DEFAULT_VARIABLES.iter().map(|s| s.to_string()).collect()
}
fn default_last_train_year() -> i32 {
    2018
}
fn default_threshold() -> u32 {
    DEFAULT_THRESHOLD
}
fn default_outlier_k() -> f64 {
    3.0
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("config: {0}")]
    Parse(String),
    #[error("environment override {var}: {msg}")]
    Env { var: String, msg: String },
    #[error("config: {0}")]
    Invalid(String),
}

impl RunConfig {
    /// Parses a config file and applies overrides from the process environment.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml_with_env(&text, &base, std::env::vars())
    }

    pub fn from_toml_with_env(
        text: &str,
        base_dir: &Path,
        env: impl IntoIterator<Item = (String, String)>,
    ) -> Result<Self, ConfigError> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let mut overrides: Vec<(String, String)> = env.into_iter().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
        overrides.sort();
        for (var, value) in overrides {
            apply_override(&mut table, &var, &value)?;
        }
        let mut cfg: RunConfig = table.try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.paths.output)
    }

    pub fn yield_filter(&self) -> YieldFilter {
        YieldFilter { season: self.season.clone(), crop: self.crop.clone(), min_year: self.min_year, max_year: self.max_year }
    }

    /// Model specs with the run seed filled in where a spec has none.
    pub fn seeded_models(&self) -> Vec<ModelSpec> {
        self.models.iter().map(|m| if m.seed.is_some() { m.clone() } else { m.clone().with_seed(self.seed) }).collect()
    }

    /// Checks value ranges and that every input path exists.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if self.months.is_empty() || self.months.iter().any(|m| !(1..=12).contains(m)) {
            return invalid(format!("months must be a non-empty list within 1..=12, got {:?}", self.months));
        }
        if self.variables.is_empty() {
            return invalid("variables must not be empty".into());
        }
        if self.models.is_empty() {
            return invalid("at least one [[models]] entry is required".into());
        }
        for m in &self.models {
            m.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        if self.match_threshold > 100 {
            return invalid(format!("match_threshold must be at most 100, got {}", self.match_threshold));
        }
        if !(self.outlier_k > 0.0) {
            return invalid(format!("outlier_k must be positive, got {}", self.outlier_k));
        }
        if self.min_year > self.max_year {
            return invalid("min_year is after max_year".into());
        }
        if self.shap.permutations == 0 || self.shap.background == 0 {
            return invalid("shap.permutations and shap.background must be at least 1".into());
        }
        let mut required = vec![("paths.rasters", &self.paths.rasters), ("paths.districts", &self.paths.districts), ("paths.yields", &self.paths.yields)];
        if let Some(p) = &self.paths.crop_mask {
            required.push(("paths.crop_mask", p));
        }
        if let Some(p) = &self.paths.aliases {
            required.push(("paths.aliases", p));
        }
        for (key, p) in required {
            let full = self.resolve(p);
            if !full.exists() {
                return invalid(format!("{key} does not exist: {}", full.display()));
            }
        }
        Ok(())
    }

    /// Short hash of the effective settings, independent of where outputs go.
    pub fn run_id(&self) -> String {
        let mut clean = self.clone();
        clean.paths.output = PathBuf::new();
        let json = serde_json::to_string(&clean).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        hex::encode(&digest[..8])
    }
}

fn apply_override(table: &mut toml::Table, var: &str, raw: &str) -> Result<(), ConfigError> {
    let key = var[ENV_PREFIX.len()..].to_lowercase();
    let parts: Vec<&str> = key.split("__").collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(ConfigError::Env { var: var.into(), msg: "empty key segment".into() });
    }
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let (last, parents) = parts.split_last().expect("non-empty");
    let mut cur = table;
    for p in parents {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| ConfigError::Env { var: var.into(), msg: format!("{p} is not a table") })?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}
