use std::cmp::Ordering;

use crate::evaluation::{compute_metrics, csv_field, MetricsReport};
use crate::matrix::FeatureMatrix;

use super::{fit, FittedModel, ModelError, ModelSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct LeaderboardRow {
    pub name: String,
    pub family: String,
    /// Test-set metrics; `None` when fitting or prediction failed.
    pub metrics: Option<MetricsReport>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub row: LeaderboardRow,
    pub model: Option<FittedModel>,
    pub predictions: Option<Vec<f64>>,
}

fn run_one(spec: &ModelSpec, train: (&FeatureMatrix, &[f64]), test: (&FeatureMatrix, &[f64])) -> Result<(FittedModel, Vec<f64>, MetricsReport), ModelError> {
    let model = fit(spec, train.0, train.1)?;
    let pred = model.predict(test.0)?;
    let metrics = compute_metrics(test.1, &pred).map_err(|e| ModelError::Numerical(e.to_string()))?;
    Ok((model, pred, metrics))
}

fn rank_order(a: &LeaderboardRow, b: &LeaderboardRow) -> Ordering {
    match (&a.metrics, &b.metrics) {
        (Some(x), Some(y)) => {
            let mape = |m: &MetricsReport| m.mape.unwrap_or(f64::INFINITY);
            mape(x).total_cmp(&mape(y)).then(y.r2.total_cmp(&x.r2))
        }
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    }
}

/// Fits every spec and scores it on the test split. Results are sorted by
/// MAPE ascending, then R2 descending; a failed fit is kept as a row with
/// its error and sorts last. The sort is stable, so ties keep spec order.
pub fn train_all(specs: &[ModelSpec], train: (&FeatureMatrix, &[f64]), test: (&FeatureMatrix, &[f64])) -> Vec<TrainedModel> {
    let mut out: Vec<TrainedModel> = specs
        .iter()
        .map(|spec| {
            let mut row = LeaderboardRow { name: spec.label().to_string(), family: spec.family().to_string(), metrics: None, error: None };
            match run_one(spec, train, test) {
                Ok((model, pred, metrics)) => {
                    row.metrics = Some(metrics);
                    TrainedModel { row, model: Some(model), predictions: Some(pred) }
                }
                Err(e) => {
                    log::warn!("model {} failed: {e}", row.name);
                    row.error = Some(e.to_string());
                    TrainedModel { row, model: None, predictions: None }
                }
            }
        })
        .collect();
    out.sort_by(|a, b| rank_order(&a.row, &b.row));
    out
}

pub fn leaderboard_csv(rows: &[TrainedModel]) -> String {
    let mut s = format!("rank,model,family,{},status\n", MetricsReport::CSV_HEADER);
    for (i, t) in rows.iter().enumerate() {
        let r = &t.row;
        let (values, status) = match (&r.metrics, &r.error) {
            (Some(m), _) => (m.csv_values(), "ok".to_string()),
            (None, e) => (",,,,,,".to_string(), csv_field(&format!("failed: {}", e.as_deref().unwrap_or("unknown")))),
        };
        s.push_str(&format!("{},{},{},{},{}\n", i + 1, csv_field(&r.name), r.family, values, status));
    }
    s
}
