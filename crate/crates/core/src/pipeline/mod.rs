//! End-to-end orchestration behind the command-line tool.
//!
//! A run executes, in order: validate, ingest, match, outliers, features,
//! split, train (per experiment), evaluate, explain, dashboard, manifest.
//! Configuration problems map to exit code 2 and stage failures to exit
//! code 3; a failed run leaves its partial outputs in place plus a
//! `failed/stage.txt` marker naming the stage.

mod artifacts;
pub mod config;
mod export;
mod ingest;
pub mod plot;
mod run;

use std::path::{Path, PathBuf};

pub use artifacts::{Manifest, ManifestEntry};
pub use config::{ConfigError, ExperimentMode, MaskConfig, Paths, RunConfig, ShapConfig};
pub use export::export_dashboard;
pub use ingest::{build_cube, load_month, read_inputs};
pub use run::{cmd_run, ExperimentSummary, RunSummary};

use crate::dataset::{synth_generate, SynthParams};
use crate::matching::link_districts;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("stage {stage} failed: {message}")]
    Stage { stage: &'static str, message: String },
}

impl PipelineError {
    pub fn stage(stage: &'static str, message: impl ToString) -> Self {
        PipelineError::Stage { stage, message: message.to_string() }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Stage { .. } => 3,
        }
    }
}

/// Writes a synthetic dataset plus a ready-to-run `config.toml` into `out`.
pub fn cmd_synth(params: &SynthParams, out: &Path) -> Result<PathBuf, PipelineError> {
    let world = synth_generate(params).map_err(|e| PipelineError::stage("synth", e))?;
    world.write_to(out).map_err(|e| PipelineError::stage("synth", e))?;
    let config = synth_config(params);
    let path = out.join("config.toml");
    std::fs::write(&path, config).map_err(|e| PipelineError::stage("synth", e))?;
    log::info!("synth: {} districts, {} grids written to {}", world.districts.districts.len(), world.grids.len(), out.display());
    Ok(path)
}

fn synth_config(p: &SynthParams) -> String {
    let mut s = format!(
        "# Generated by `yieldcast synth`.\n\
         seed = {seed}\n\
         last_train_year = {last_train}\n\
         min_year = {first}\n\
         max_year = {last}\n\
         experiment = \"both\"\n\
         \n\
         [paths]\n\
         rasters = \"rasters\"\n\
         districts = \"districts.geojson\"\n\
         yields = \"yields.csv\"\n\
         crop_mask = \"crop_mask.asc\"\n\
         output = \"run\"\n\
         \n\
         [shap]\n\
         permutations = 256\n\
         background = 64\n\
         rows = 40\n\
         dependence_feature = \"t2m_aug\"\n\
         color_feature = \"lai_aug\"\n",
        seed = p.seed,
        first = p.first_year,
        last = p.last_year,
        last_train = (p.last_year - 2).max(p.first_year),
    );
    for f in crate::models::ModelKind::FAMILIES {
        s.push_str(&format!("\n[[models]]\nfamily = \"{f}\"\n"));
    }
    s
}

/// Runs ingest and name matching only; writes `match.csv` into `out`.
pub fn cmd_match(cfg: &RunConfig, out: &Path) -> Result<PathBuf, PipelineError> {
    cfg.validate()?;
    let inputs = read_inputs(cfg).map_err(|e| PipelineError::stage("ingest", e))?;
    let keys = run::yield_keys(&inputs.yields.records);
    let linkage = link_districts(&keys, &inputs.shapes, cfg.match_threshold, &inputs.aliases);
    std::fs::create_dir_all(out).map_err(|e| PipelineError::stage("match", e))?;
    let path = out.join("match.csv");
    std::fs::write(&path, linkage.to_csv()).map_err(|e| PipelineError::stage("match", e))?;
    log::info!("match: {} of {} yield districts linked", linkage.matched_count(), keys.len());
    Ok(path)
}
