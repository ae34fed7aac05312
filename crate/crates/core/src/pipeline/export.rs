use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::dashboard::{build_bundle, DashboardBundle, Metadata, Prediction};

use super::config::RunConfig;
use super::ingest::read_shapes;
use super::PipelineError;

#[derive(Deserialize)]
struct ResidualRow {
    state: String,
    district: String,
    year: i32,
    actual: f64,
    predicted: f64,
}

#[derive(Deserialize)]
struct ObservedRow {
    state: String,
    district: String,
    year: i32,
    #[serde(rename = "yield")]
    value: f64,
}

#[derive(Deserialize)]
struct BoardRow {
    model: String,
    family: String,
    status: String,
}

fn reader(path: &Path) -> Result<csv::Reader<fs::File>, String> {
    csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, String> {
    reader(path)?.deserialize().collect::<Result<Vec<T>, _>>().map_err(|e| format!("{}: {e}", path.display()))
}

/// Builds the bundle from a finished run's CSV outputs, so a dashboard
/// can be regenerated without retraining.
pub(crate) fn build_dashboard_from_artifacts(cfg: &RunConfig, run_dir: &Path, experiment: &str, run_id: &str) -> Result<DashboardBundle, String> {
    let exp_dir = run_dir.join(experiment);
    let residuals: Vec<ResidualRow> = read_rows(&exp_dir.join("residuals.csv"))?;
    let observed: HashMap<(String, String, i32), f64> = read_rows::<ObservedRow>(&run_dir.join("features.csv"))?
        .into_iter()
        .map(|r| ((r.state, r.district, r.year), r.value))
        .collect();
    let board: Vec<BoardRow> = read_rows(&exp_dir.join("leaderboard.csv"))?;
    let best = board.into_iter().find(|r| r.status == "ok").ok_or_else(|| format!("{experiment}: no successful model in leaderboard"))?;
    let shapes = read_shapes(cfg)?;
    let test_years: BTreeSet<i32> = residuals.iter().map(|r| r.year).collect();
    let predictions: Vec<Prediction> = residuals
        .into_iter()
        .map(|r| Prediction { state: r.state, district: r.district, year: r.year, predicted: r.predicted, actual: Some(r.actual) })
        .collect();
    let metadata = Metadata {
        run_id: run_id.to_string(),
        experiment: experiment.to_string(),
        model_name: best.model,
        model_family: best.family,
        test_years: test_years.into_iter().collect(),
    };
    Ok(build_bundle(metadata, &predictions, &observed, &shapes, &cfg.names))
}

/// Regenerates `dashboard.json` for `experiment` of an existing run into `out`.
pub fn export_dashboard(cfg: &RunConfig, run_dir: &Path, experiment: &str, out: &Path) -> Result<PathBuf, PipelineError> {
    cfg.validate()?;
    let bundle = build_dashboard_from_artifacts(cfg, run_dir, experiment, &cfg.run_id()).map_err(|e| PipelineError::stage("dashboard", e))?;
    let path = if out.extension().is_some_and(|e| e == "json") { out.to_path_buf() } else { out.join("dashboard.json") };
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| PipelineError::stage("dashboard", e))?;
    }
    fs::write(&path, bundle.to_json()).map_err(|e| PipelineError::stage("dashboard", e))?;
    Ok(path)
}
