use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use yieldcast::dashboard::DashboardBundle;
use yieldcast::dataset::{FeatureRow, FeatureTable, InputSet, SynthParams};
use yieldcast::models::read_model;
use yieldcast::pipeline::plot::cmd_plot;
use yieldcast::pipeline::{cmd_match, cmd_run, cmd_synth, export_dashboard, RunConfig};

/// Synthesises a small world and returns its config with fast SHAP settings.
fn small_world(dir: &Path) -> RunConfig {
    let params = SynthParams { seed: 5, n_districts: 16, first_year: 2001, last_year: 2006, noise_sigma: 0.3 };
    let path = cmd_synth(&params, dir).unwrap();
    let text = fs::read_to_string(path).unwrap().replace("permutations = 256", "permutations = 8").replace("background = 64", "background = 8").replace("rows = 40", "rows = 3");
    RunConfig::from_toml_with_env(&text, dir, []).unwrap()
}

fn features(path: &Path) -> FeatureTable {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path).unwrap();
    let headers = rdr.headers().unwrap().clone();
    let eo_columns = headers.iter().skip(4).take(headers.len() - 5).map(str::to_string).collect();
    let rows = rdr
        .records()
        .map(|rec| {
            let rec = rec.unwrap();
            FeatureRow {
                district_id: rec[0].parse().unwrap(),
                state: rec[1].to_string(),
                district: rec[2].to_string(),
                year: rec[3].parse().unwrap(),
                eo: (4..rec.len() - 1).map(|i| rec[i].parse().unwrap()).collect(),
                target: rec[rec.len() - 1].parse().unwrap(),
            }
        })
        .collect();
    FeatureTable { eo_columns, inputs: InputSet::AllFeatures, rows, exclusions: Vec::new() }
}

#[test]
fn small_run_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_world(dir.path());
    let summary = cmd_run(&cfg).unwrap();
    let run = cfg.output_dir();
    assert_eq!(summary.experiments.len(), 2);
    assert_eq!(summary.experiments[0].name, "all_features");
    assert_eq!(summary.experiments[1].name, "eo_only");
    assert!(summary.experiments.iter().all(|e| e.leaderboard.len() == 9));

    // Manifest lists every file with its hash and is itself on disk.
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("manifest.json")).unwrap()).unwrap();
    let files = manifest["files"].as_array().unwrap();
    assert_eq!(files.len(), summary.manifest.files.len());
    let mut paths = Vec::new();
    for f in files {
        let rel = f["path"].as_str().unwrap();
        let bytes = fs::read(run.join(rel)).unwrap();
        assert_eq!(f["sha256"].as_str().unwrap(), hex::encode(Sha256::digest(&bytes)), "{rel}");
        assert_eq!(f["bytes"].as_u64().unwrap(), bytes.len() as u64);
        paths.push(rel.to_string());
    }
    let mut sorted = paths.clone();
    sorted.sort();
    assert_eq!(paths, sorted);
    for rel in ["features.csv", "match.csv", "split.csv", "dashboard.json", "all_features/model.bin", "all_features/shap_importance.csv", "eo_only/leaderboard.csv"] {
        assert!(paths.iter().any(|p| p == rel), "missing {rel}");
    }

    // The persisted model reproduces the reported test predictions.
    let model = read_model(fs::File::open(run.join("all_features/model.bin")).unwrap()).unwrap();
    let (_, test) = features(&run.join("features.csv")).chronological_split(cfg.last_train_year).unwrap();
    let predicted = model.predict(&test.design_matrix()).unwrap();
    let mut rdr = csv::Reader::from_path(run.join("all_features/residuals.csv")).unwrap();
    let reported: Vec<f64> = rdr.records().map(|r| r.unwrap()[4].parse().unwrap()).collect();
    assert_eq!(reported.len(), predicted.len());
    for (a, b) in reported.iter().zip(&predicted) {
        assert_eq!(a.to_bits(), b.to_bits());
    }

    // Export from artifacts matches what the run wrote.
    let out = dir.path().join("exported");
    let path = export_dashboard(&cfg, &run, "all_features", &out).unwrap();
    assert_eq!(fs::read(&path).unwrap(), fs::read(run.join("dashboard.json")).unwrap());
    let bundle = DashboardBundle::from_json(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(bundle.metadata.run_id, summary.run_id);

    let plots = cmd_plot(&run.join("all_features"), &dir.path().join("plots"), ("t2m_aug", "lai_aug")).unwrap();
    assert_eq!(plots.len(), 5);
    for p in plots {
        assert!(fs::read_to_string(p).unwrap().starts_with("<svg"));
    }

    let matched = cmd_match(&cfg, &dir.path().join("m")).unwrap();
    assert_eq!(fs::read(matched).unwrap(), fs::read(run.join("match.csv")).unwrap());
}

#[test]
fn bad_config_is_exit_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_world(dir.path());
    cfg.paths.yields = "missing.csv".into();
    let err = cmd_run(&cfg).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(!cfg.output_dir().exists());
}

#[test]
fn stage_failure_is_exit_code_three_with_marker() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_world(dir.path());
    fs::write(dir.path().join("districts.geojson"), "not json").unwrap();
    let err = cmd_run(&cfg).unwrap_err();
    assert_eq!(err.exit_code(), 3);
    let marker = fs::read_to_string(cfg.output_dir().join("failed/stage.txt")).unwrap();
    assert!(marker.starts_with("stage: ingest\n"), "{marker}");
}
