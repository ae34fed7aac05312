//! The `dashboard.json` bundle consumed by the static dashboard.
//!
//! Top-level fields, in file order:
//!
//! - `schema_version`: integer, currently [`SCHEMA_VERSION`]
//! - `metadata`: run id, experiment, model name and family, test years
//! - `districts`: one record per predicted (state, district, year), sorted by
//!   state, district, year. `geometry_index` points into `geojson.features`.
//!   Missing prior-year or actual values are explicit `null`s.
//! - `states`: per (state, year) means of the district `percent_change` and
//!   `ape_pct` values that are not null
//! - `series`: per year mean actual and mean predicted yield
//! - `geojson`: the district polygons as a FeatureCollection
//! - `issues`: human-readable problems found while building the bundle
//!
//! `percent_change = 100 (predicted - previous_actual) / previous_actual`
//! when `previous_actual > 0`; `ape_pct = 100 |actual - predicted| / actual`
//! when `actual > 0`.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::geodata::{DistrictSet, NameKeys};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub run_id: String,
    pub experiment: String,
    pub model_name: String,
    pub model_family: String,
    pub test_years: Vec<i32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistrictRecord {
    pub state: String,
    pub district: String,
    pub year: i32,
    pub geometry_index: Option<usize>,
    pub predicted: f64,
    pub previous_actual: Option<f64>,
    pub percent_change: Option<f64>,
    pub actual: Option<f64>,
    pub ape_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateAggregate {
    pub state: String,
    pub year: i32,
    pub n_districts: usize,
    pub mean_percent_change: Option<f64>,
    pub mean_ape_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearPoint {
    pub year: i32,
    pub n: usize,
    pub mean_actual: Option<f64>,
    pub mean_predicted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DashboardBundle {
    pub schema_version: u32,
    pub metadata: Metadata,
    pub districts: Vec<DistrictRecord>,
    pub states: Vec<StateAggregate>,
    pub series: Vec<YearPoint>,
    pub geojson: Value,
    pub issues: Vec<String>,
}

/// A model prediction keyed by polygon names.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub state: String,
    pub district: String,
    pub year: i32,
    pub predicted: f64,
    pub actual: Option<f64>,
}

pub fn percent_change(predicted: f64, previous: Option<f64>) -> Option<f64> {
    previous.filter(|&p| p > 0.0).map(|p| 100.0 * (predicted - p) / p)
}

fn mean_of(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// `observed` holds actual yields by (state, district, year) for any year,
/// used for the previous-year comparison.
pub fn build_bundle(
    metadata: Metadata,
    predictions: &[Prediction],
    observed: &HashMap<(String, String, i32), f64>,
    shapes: &DistrictSet,
    keys: &NameKeys,
) -> DashboardBundle {
    let geometry: HashMap<(&str, &str), usize> =
        shapes.districts.iter().enumerate().map(|(i, d)| ((d.state.as_str(), d.name.as_str()), i)).collect();
    let mut issues = Vec::new();
    let mut districts: Vec<DistrictRecord> = predictions
        .iter()
        .map(|p| {
            let geometry_index = geometry.get(&(p.state.as_str(), p.district.as_str())).copied();
            if geometry_index.is_none() {
                issues.push(format!("no geometry for {} / {} ({})", p.state, p.district, p.year));
            }
            let previous_actual = observed.get(&(p.state.clone(), p.district.clone(), p.year - 1)).copied();
            let actual = p.actual;
            DistrictRecord {
                state: p.state.clone(),
                district: p.district.clone(),
                year: p.year,
                geometry_index,
                predicted: p.predicted,
                previous_actual,
                percent_change: percent_change(p.predicted, previous_actual),
                actual,
                ape_pct: actual.filter(|&a| a > 0.0).map(|a| 100.0 * (a - p.predicted).abs() / a),
            }
        })
        .collect();
    districts.sort_by(|a, b| (&a.state, &a.district, a.year).cmp(&(&b.state, &b.district, b.year)));
    let missing_prior = districts.iter().filter(|d| d.percent_change.is_none()).count();
    if missing_prior > 0 {
        issues.push(format!("{missing_prior} district records have no previous-year yield"));
    }

    let mut groups: BTreeMap<(&str, i32), Vec<&DistrictRecord>> = BTreeMap::new();
    for d in &districts {
        groups.entry((&d.state, d.year)).or_default().push(d);
    }
    let states = groups
        .into_iter()
        .map(|((state, year), rs)| StateAggregate {
            state: state.to_string(),
            year,
            n_districts: rs.len(),
            mean_percent_change: mean_of(rs.iter().filter_map(|r| r.percent_change)),
            mean_ape_pct: mean_of(rs.iter().filter_map(|r| r.ape_pct)),
        })
        .collect();

    let mut years: BTreeMap<i32, Vec<&DistrictRecord>> = BTreeMap::new();
    for d in &districts {
        years.entry(d.year).or_default().push(d);
    }
    let series = years
        .into_iter()
        .map(|(year, rs)| YearPoint {
            year,
            n: rs.len(),
            mean_actual: mean_of(rs.iter().filter_map(|r| r.actual)),
            mean_predicted: mean_of(rs.iter().map(|r| r.predicted)).unwrap_or(0.0),
        })
        .collect();

    DashboardBundle {
        schema_version: SCHEMA_VERSION,
        metadata,
        districts,
        states,
        series,
        geojson: shapes.to_geojson(keys),
        issues,
    }
}

impl DashboardBundle {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bundle serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodata::{rect_ring, District, Polygon};

    fn shapes() -> DistrictSet {
        let d = |s: &str, n: &str, x: f64| District {
            name: n.into(),
            state: s.into(),
            polygons: vec![Polygon { rings: vec![rect_ring(x, 0.0, x + 1.0, 1.0)] }],
        };
        DistrictSet::new(vec![d("Chhattisgarh", "Jashpur", 0.0), d("Chhattisgarh", "Korba", 1.0), d("Gujarat", "Kheda", 2.0)])
            .unwrap()
    }

    fn meta() -> Metadata {
        Metadata { run_id: "r".into(), experiment: "all_features".into(), model_name: "gbm".into(), model_family: "gbm".into(), test_years: vec![2020] }
    }

    fn pred(s: &str, d: &str, predicted: f64, actual: Option<f64>) -> Prediction {
        Prediction { state: s.into(), district: d.into(), year: 2020, predicted, actual }
    }

    #[test]
    fn anchors_and_aggregates() {
        let mut observed = HashMap::new();
        observed.insert(("Chhattisgarh".to_string(), "Jashpur".to_string(), 2019), 1.0);
        observed.insert(("Chhattisgarh".to_string(), "Korba".to_string(), 2019), 2.0);
        observed.insert(("Gujarat".to_string(), "Kheda".to_string(), 2019), 2.0);
        let preds = [
            pred("Chhattisgarh", "Jashpur", 1.52, Some(1.6)),
            pred("Chhattisgarh", "Korba", 2.44, None),
            pred("Gujarat", "Kheda", 1.46, Some(1.46)),
            pred("Gujarat", "Anand", 3.0, None),
        ];
        let b = build_bundle(meta(), &preds, &observed, &shapes(), &NameKeys::default());
        let j = &b.districts[0];
        assert_eq!(j.district, "Jashpur");
        assert!((j.percent_change.unwrap() - 52.0).abs() < 1e-9);
        assert!((b.districts[1].percent_change.unwrap() - 22.0).abs() < 1e-9);
        let kheda = b.districts.iter().find(|d| d.district == "Kheda").unwrap();
        assert!((kheda.percent_change.unwrap() + 27.0).abs() < 1e-9);
        assert_eq!(kheda.ape_pct, Some(0.0));
        let anand = &b.districts[2];
        assert_eq!((anand.geometry_index, anand.percent_change, anand.actual), (None, None, None));
        assert!(b.issues.iter().any(|i| i.contains("Anand")));
        let ch = &b.states[0];
        assert_eq!(ch.n_districts, 2);
        assert!((ch.mean_percent_change.unwrap() - 37.0).abs() < 1e-9);
        assert!((ch.mean_ape_pct.unwrap() - 5.0).abs() < 1e-9);
    }

    #[test]
    fn unchanged_prediction_is_zero_change() {
        assert_eq!(percent_change(2.0, Some(2.0)), Some(0.0));
        assert_eq!(percent_change(2.0, Some(0.0)), None);
        assert_eq!(percent_change(2.0, None), None);
    }

    #[test]
    fn round_trips_with_explicit_nulls() {
        let b = build_bundle(meta(), &[pred("Gujarat", "Kheda", 0.1 + 0.2, None)], &HashMap::new(), &shapes(), &NameKeys::default());
        let text = b.to_json();
        assert!(text.contains("\"previous_actual\": null"));
        assert_eq!(DashboardBundle::from_json(&text).unwrap(), b);
    }
}
