use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dataset::{build_feature_table, remove_yield_outliers, FeatureSchema, FeatureTable, InputSet, YieldRecord};
use crate::evaluation::{csv_field, region_error, residual_summary, RegionRow};
use crate::explain::{explain_rows, Background, Importance, ShapTable};
use crate::matching::link_districts;
use crate::models::{leaderboard_csv, train_all, write_model, LeaderboardRow, TrainedModel};

use super::artifacts::{Artifacts, Manifest};
use super::config::{ExperimentMode, RunConfig};
use super::export::build_dashboard_from_artifacts;
use super::ingest::read_inputs;
use super::PipelineError;

#[derive(Debug, Clone)]
pub struct ExperimentSummary {
    pub name: String,
    pub leaderboard: Vec<LeaderboardRow>,
    pub train_rows: usize,
    pub test_rows: usize,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub run_id: String,
    pub output: PathBuf,
    pub experiments: Vec<ExperimentSummary>,
    /// Importance ranking from the explained model, when SHAP ran.
    pub shap_importance: Option<Vec<Importance>>,
    pub manifest: Manifest,
}

#[derive(Serialize)]
struct DataReport {
    yield_rows: usize,
    yield_rows_skipped: usize,
    yield_rows_other_season: usize,
    outliers_removed: usize,
    yield_districts: usize,
    linked_districts: usize,
    feature_rows: usize,
    excluded_rows: usize,
    train_rows: usize,
    test_rows: usize,
    train_years: Vec<i32>,
    test_years: Vec<i32>,
}

pub(crate) fn yield_keys(records: &[YieldRecord]) -> Vec<(String, String)> {
    let set: BTreeSet<(String, String)> = records.iter().map(|r| (r.state.clone(), r.district.clone())).collect();
    set.into_iter().collect()
}

pub(crate) fn experiments(mode: ExperimentMode) -> Vec<InputSet> {
    match mode {
        ExperimentMode::AllFeatures => vec![InputSet::AllFeatures],
        ExperimentMode::EoOnly => vec![InputSet::EoOnly],
        ExperimentMode::Both => vec![InputSet::AllFeatures, InputSet::EoOnly],
    }
}

struct Stage {
    name: &'static str,
    started: Instant,
}

impl Stage {
    fn start(name: &'static str) -> Self {
        info!("stage={name} status=start");
        Stage { name, started: Instant::now() }
    }

    fn done(self) {
        info!("stage={} status=ok seconds={:.3}", self.name, self.started.elapsed().as_secs_f64());
    }

    fn err(&self, e: impl ToString) -> PipelineError {
        PipelineError::stage(self.name, e)
    }
}

/// Executes a full run into the configured output directory.
pub fn cmd_run(cfg: &RunConfig) -> Result<RunSummary, PipelineError> {
    let stage = Stage::start("validate");
    cfg.validate()?;
    stage.done();
    let out = cfg.output_dir();
    let failed = out.join("failed");
    if failed.exists() {
        fs::remove_dir_all(&failed).map_err(|e| PipelineError::stage("validate", e))?;
    }
    fs::create_dir_all(&out).map_err(|e| PipelineError::stage("validate", e))?;
    let result = run_stages(cfg, &out);
    if let Err(PipelineError::Stage { stage, message }) = &result {
        let _ = fs::create_dir_all(&failed);
        let _ = fs::write(failed.join("stage.txt"), format!("stage: {stage}\nerror: {message}\n"));
        log::error!("stage={stage} status=failed error={message}");
    }
    result
}

fn run_stages(cfg: &RunConfig, out: &std::path::Path) -> Result<RunSummary, PipelineError> {
    let run_id = cfg.run_id();
    let mut art = Artifacts::new(out);
    info!("run {run_id} writing to {}", out.display());

    let stage = Stage::start("ingest");
    let inputs = read_inputs(cfg).map_err(|e| stage.err(e))?;
    stage.done();

    let stage = Stage::start("match");
    let keys = yield_keys(&inputs.yields.records);
    let linkage = link_districts(&keys, &inputs.shapes, cfg.match_threshold, &inputs.aliases);
    art.write("match.csv", linkage.to_csv()).map_err(|e| stage.err(e))?;
    info!("match: {} of {} yield districts linked", linkage.matched_count(), keys.len());
    if linkage.matched_count() == 0 {
        return Err(stage.err("no yield district matched a polygon"));
    }
    stage.done();

    let stage = Stage::start("outliers");
    let (kept, removed) = remove_yield_outliers(&inputs.yields.records, cfg.outlier_k, cfg.outlier_scope);
    info!("outliers: removed {removed} of {} yield rows", inputs.yields.records.len());
    stage.done();

    let stage = Stage::start("features");
    let feature_years: BTreeSet<i32> = kept.iter().map(|r| r.year - cfg.sowing_year_offset).collect();
    let cube = super::ingest::build_cube(cfg, &inputs.shapes, &feature_years).map_err(|e| stage.err(e))?;
    let schema = FeatureSchema { variables: cfg.variables.clone(), months: cfg.months.clone() };
    let table = build_feature_table(&cube, &schema, &inputs.shapes, &kept, &linkage, cfg.sowing_year_offset, InputSet::AllFeatures)
        .map_err(|e| stage.err(e))?;
    art.write("features.csv", table.to_csv()).map_err(|e| stage.err(e))?;
    let mut excl = String::from("state,district,year,reason\n");
    for e in &table.exclusions {
        let _ = writeln!(excl, "{},{},{},{}", csv_field(&e.state), csv_field(&e.district), e.year, csv_field(&e.reason));
    }
    art.write("exclusions.csv", excl).map_err(|e| stage.err(e))?;
    stage.done();

    let stage = Stage::start("split");
    let (train, test) = table.chronological_split(cfg.last_train_year).map_err(|e| stage.err(e))?;
    let mut split = String::from("year,set,rows\n");
    for (y, n) in train.year_counts() {
        let _ = writeln!(split, "{y},train,{n}");
    }
    for (y, n) in test.year_counts() {
        let _ = writeln!(split, "{y},test,{n}");
    }
    art.write("split.csv", split).map_err(|e| stage.err(e))?;
    let report = DataReport {
        yield_rows: inputs.yields.records.len(),
        yield_rows_skipped: inputs.yields.skipped,
        yield_rows_other_season: inputs.yields.filtered,
        outliers_removed: removed,
        yield_districts: keys.len(),
        linked_districts: linkage.matched_count(),
        feature_rows: table.len(),
        excluded_rows: table.exclusions.len(),
        train_rows: train.len(),
        test_rows: test.len(),
        train_years: train.year_counts().into_keys().collect(),
        test_years: test.year_counts().into_keys().collect(),
    };
    art.write("data_report.json", serde_json::to_string_pretty(&report).expect("report serializes")).map_err(|e| stage.err(e))?;
    info!("split: {} train rows, {} test rows", train.len(), test.len());
    stage.done();

    let specs = cfg.seeded_models();
    let mut summaries = Vec::new();
    let mut primary: Option<(InputSet, TrainedModel)> = None;
    for inputs_set in experiments(cfg.experiment) {
        let name = inputs_set.label();
        let stage = Stage::start("train");
        let tr = train.with_inputs(inputs_set);
        let te = test.with_inputs(inputs_set);
        let (xtr, ytr) = (tr.design_matrix(), tr.targets());
        let (xte, yte) = (te.design_matrix(), te.targets());
        let trained = train_all(&specs, (&xtr, &ytr), (&xte, &yte));
        art.write(&format!("{name}/leaderboard.csv"), leaderboard_csv(&trained)).map_err(|e| stage.err(e))?;
        art.write(&format!("{name}/predictions.csv"), predictions_csv(&te, &trained)).map_err(|e| stage.err(e))?;
        for t in &trained {
            if let Some(m) = &t.metrics_ok() {
                info!("{name}: {} r2={:.4} mape={:?}", t.row.name, m.r2, m.mape);
            }
        }
        let best = trained.iter().find(|t| t.model.is_some()).cloned().ok_or_else(|| stage.err("every model failed to fit"))?;
        let model = best.model.as_ref().expect("best has a model");
        let mut bin = Vec::new();
        write_model(model, &mut bin).map_err(|e| stage.err(e))?;
        art.write(&format!("{name}/model.bin"), bin).map_err(|e| stage.err(e))?;
        stage.done();

        let stage = Stage::start("evaluate");
        let pred = best.predictions.as_deref().expect("best has predictions");
        write_evaluation(&mut art, name, &te, pred).map_err(|e| stage.err(e))?;
        stage.done();

        summaries.push(ExperimentSummary {
            name: name.to_string(),
            leaderboard: trained.iter().map(|t| t.row.clone()).collect(),
            train_rows: tr.len(),
            test_rows: te.len(),
        });
        if primary.is_none() {
            primary = Some((inputs_set, best));
        }
    }
    let (primary_set, best) = primary.expect("at least one experiment");

    let mut shap_importance = None;
    if cfg.shap.enabled {
        let stage = Stage::start("explain");
        let tr = train.with_inputs(primary_set);
        let te = test.with_inputs(primary_set);
        let model = best.model.as_ref().expect("best has a model");
        let background = Background::sample(&tr.design_matrix(), cfg.shap.background, cfg.seed).map_err(|e| stage.err(e))?;
        let xte = te.design_matrix();
        let rows = explained_rows(xte.n_rows(), cfg.shap.rows, cfg.seed);
        let sub = xte.select_rows(&rows);
        info!("explain: {} on {} rows, {} permutations, {} background rows", best.row.name, rows.len(), cfg.shap.permutations, background.len());
        let atts = explain_rows(model, &sub, &background, cfg.shap.permutations, cfg.seed).map_err(|e| stage.err(e))?;
        let table = ShapTable::new(&sub, &atts).map_err(|e| stage.err(e))?;
        let name = primary_set.label();
        art.write(&format!("{name}/shap_importance.csv"), table.importance_csv()).map_err(|e| stage.err(e))?;
        art.write(&format!("{name}/shap_summary.csv"), table.summary_csv()).map_err(|e| stage.err(e))?;
        let dep = table.dependence_csv(&cfg.shap.dependence_feature, &cfg.shap.color_feature).map_err(|e| stage.err(e))?;
        art.write(&format!("{name}/shap_dependence.csv"), dep).map_err(|e| stage.err(e))?;
        shap_importance = Some(table.importance());
        stage.done();
    }

    let stage = Stage::start("dashboard");
    let bundle = build_dashboard_from_artifacts(cfg, out, primary_set.label(), &run_id).map_err(|e| stage.err(e))?;
    art.write("dashboard.json", bundle.to_json()).map_err(|e| stage.err(e))?;
    stage.done();

    let stage = Stage::start("manifest");
    let manifest = art.manifest(&run_id, cfg.seed);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(art.root().join("manifest.json"), text).map_err(|e| stage.err(e))?;
    stage.done();

    Ok(RunSummary { run_id, output: out.to_path_buf(), experiments: summaries, shap_importance, manifest })
}

trait MetricsOk {
    fn metrics_ok(&self) -> Option<crate::evaluation::MetricsReport>;
}

impl MetricsOk for TrainedModel {
    fn metrics_ok(&self) -> Option<crate::evaluation::MetricsReport> {
        self.row.metrics.clone()
    }
}

/// Test rows to explain: all of them when `limit` is 0 or covers the set,
/// otherwise a seeded sample kept in table order.
pub(crate) fn explained_rows(n: usize, limit: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    if limit == 0 || limit >= n {
        return idx;
    }
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    idx.truncate(limit);
    idx.sort_unstable();
    idx
}

fn predictions_csv(test: &FeatureTable, trained: &[TrainedModel]) -> String {
    let mut s = String::from("state,district,year,actual");
    for t in trained {
        let _ = write!(s, ",{}", csv_field(&t.row.name));
    }
    s.push('\n');
    for (i, r) in test.rows.iter().enumerate() {
        let _ = write!(s, "{},{},{},{}", csv_field(&r.state), csv_field(&r.district), r.year, r.target);
        for t in trained {
            match &t.predictions {
                Some(p) => {
                    let _ = write!(s, ",{}", p[i]);
                }
                None => s.push(','),
            }
        }
        s.push('\n');
    }
    s
}

fn write_evaluation(art: &mut Artifacts, name: &str, test: &FeatureTable, pred: &[f64]) -> Result<(), String> {
    let actual = test.targets();
    let mut s = String::from("state,district,year,actual,predicted,residual\n");
    for ((r, a), p) in test.rows.iter().zip(&actual).zip(pred) {
        let _ = writeln!(s, "{},{},{},{},{},{}", csv_field(&r.state), csv_field(&r.district), r.year, a, p, a - p);
    }
    art.write(&format!("{name}/residuals.csv"), s)?;
    if let Ok(summary) = residual_summary(&actual, pred) {
        let mut h = String::from("bin_lo,bin_hi,count\n");
        let edges = summary.histogram.edges();
        for (i, c) in summary.histogram.counts.iter().enumerate() {
            let _ = writeln!(h, "{},{},{}", edges[i], edges[i + 1], c);
        }
        art.write(&format!("{name}/residual_histogram.csv"), h)?;
        let stats = format!("n,mean,skewness\n{},{},{}\n", summary.residuals.len(), summary.mean, summary.skewness);
        art.write(&format!("{name}/residual_stats.csv"), stats)?;
    }
    let rows: Vec<RegionRow> = test
        .rows
        .iter()
        .zip(pred)
        .map(|(r, p)| RegionRow { state: r.state.clone(), district: r.district.clone(), actual: r.target, predicted: *p })
        .collect();
    let region = region_error(&rows);
    art.write(&format!("{name}/region_states.csv"), region.states_csv())?;
    art.write(&format!("{name}/region_districts.csv"), region.districts_csv())?;
    Ok(())
}
