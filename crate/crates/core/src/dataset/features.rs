use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use log::info;
use serde::{Deserialize, Serialize};

use super::monthly::month_abbrev;
use super::yields::YieldRecord;
use super::DatasetError;
use crate::geodata::DistrictSet;
use crate::matching::Linkage;
use crate::matrix::{schema_hash, FeatureMatrix};

pub const DEFAULT_VARIABLES: [&str; 7] = ["pev", "t2m", "tp", "lai", "sp", "swvl1", "ndvi"];
pub const DEFAULT_MONTHS: [u32; 7] = [5, 6, 7, 8, 9, 10, 11];

/// Which EO variables and months become columns. Columns are ordered
/// variable-major: `pev_may, pev_jun, ..., ndvi_nov`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSchema {
    pub variables: Vec<String>,
    pub months: Vec<u32>,
}

impl Default for FeatureSchema {
    fn default() -> Self {
        Self {
            variables: DEFAULT_VARIABLES.iter().map(|s| s.to_string()).collect(),
            months: DEFAULT_MONTHS.to_vec(),
        }
    }
}

impl FeatureSchema {
    pub fn eo_columns(&self) -> Vec<String> {
        self.variables
            .iter()
            .flat_map(|v| self.months.iter().map(move |&m| format!("{v}_{}", month_abbrev(m))))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.variables.len() * self.months.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Model-input column sets: everything, or the EO columns alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputSet {
    AllFeatures,
    EoOnly,
}

impl InputSet {
    pub fn label(self) -> &'static str {
        match self {
            InputSet::AllFeatures => "all_features",
            InputSet::EoOnly => "eo_only",
        }
    }
}

/// District-level monthly means keyed by `(district index, variable, year, month)`.
/// Absent keys are missing values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ZonalCube {
    values: HashMap<(usize, String, i32, u32), f64>,
}

impl ZonalCube {
    pub fn insert(&mut self, district: usize, variable: &str, year: i32, month: u32, value: f64) {
        if value.is_finite() {
            self.values.insert((district, variable.to_owned(), year, month), value);
        }
    }

    pub fn get(&self, district: usize, variable: &str, year: i32, month: u32) -> Option<f64> {
        self.values.get(&(district, variable.to_owned(), year, month)).copied()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub district_id: u32,
    pub state: String,
    pub district: String,
    pub year: i32,
    pub eo: Vec<f64>,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Exclusion {
    pub state: String,
    pub district: String,
    pub year: i32,
    pub reason: String,
}

/// Modelling table, one row per `(district_id, year)`, sorted by that key.
///
/// Model inputs are `year, district_id` followed by the EO columns when
/// `inputs` is [`InputSet::AllFeatures`], and the EO columns alone for
/// [`InputSet::EoOnly`]. Identifiers are kept on every row either way.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub eo_columns: Vec<String>,
    pub inputs: InputSet,
    pub rows: Vec<FeatureRow>,
    pub exclusions: Vec<Exclusion>,
}

impl FeatureTable {
    pub fn input_columns(&self) -> Vec<String> {
        let mut cols = Vec::with_capacity(self.eo_columns.len() + 2);
        if self.inputs == InputSet::AllFeatures {
            cols.push("year".to_owned());
            cols.push("district_id".to_owned());
        }
        cols.extend(self.eo_columns.iter().cloned());
        cols
    }

    pub fn with_inputs(&self, inputs: InputSet) -> FeatureTable {
        FeatureTable { inputs, ..self.clone() }
    }

    pub fn design_matrix(&self) -> FeatureMatrix {
        let cols = self.input_columns();
        let mut data = Vec::with_capacity(self.rows.len() * cols.len());
        for r in &self.rows {
            if self.inputs == InputSet::AllFeatures {
                data.push(r.year as f64);
                data.push(r.district_id as f64);
            }
            data.extend_from_slice(&r.eo);
        }
        FeatureMatrix::new(cols, data)
    }

    pub fn targets(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.target).collect()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Hash of the full persisted column layout.
    pub fn schema_hash(&self) -> String {
        schema_hash(&self.csv_columns())
    }

    fn csv_columns(&self) -> Vec<String> {
        let mut cols: Vec<String> = ["district_id", "state", "district", "year"].iter().map(|s| s.to_string()).collect();
        cols.extend(self.eo_columns.iter().cloned());
        cols.push("yield".to_owned());
        cols
    }

    /// CSV preceded by a `# schema_hash=<hex>` comment line.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# schema_hash={}", self.schema_hash());
        let mut w = csv::Writer::from_writer(Vec::new());
        let _ = w.write_record(self.csv_columns());
        for r in &self.rows {
            let mut rec = vec![r.district_id.to_string(), r.state.clone(), r.district.clone(), r.year.to_string()];
            rec.extend(r.eo.iter().map(|v| v.to_string()));
            rec.push(r.target.to_string());
            let _ = w.write_record(&rec);
        }
        out.push_str(&String::from_utf8(w.into_inner().unwrap_or_default()).unwrap_or_default());
        out
    }

    /// Rows with `year <= last_train_year` train, the rest test. Order is preserved.
    pub fn chronological_split(&self, last_train_year: i32) -> Result<(FeatureTable, FeatureTable), DatasetError> {
        if self.rows.is_empty() {
            return Err(DatasetError::EmptyTable);
        }
        let (train, test): (Vec<FeatureRow>, Vec<FeatureRow>) =
            self.rows.iter().cloned().partition(|r| r.year <= last_train_year);
        if train.is_empty() {
            return Err(DatasetError::EmptySplit("train"));
        }
        if test.is_empty() {
            return Err(DatasetError::EmptySplit("test"));
        }
        let part = |rows| FeatureTable {
            eo_columns: self.eo_columns.clone(),
            inputs: self.inputs,
            rows,
            exclusions: Vec::new(),
        };
        Ok((part(train), part(test)))
    }

    /// Row counts per year.
    pub fn year_counts(&self) -> BTreeMap<i32, usize> {
        let mut counts = BTreeMap::new();
        for r in &self.rows {
            *counts.entry(r.year).or_insert(0) += 1;
        }
        counts
    }
}

/// District ids in sorted `(state, district)` order over the whole polygon set.
pub fn district_ids(shapes: &DistrictSet) -> Vec<u32> {
    let mut order: Vec<usize> = (0..shapes.len()).collect();
    order.sort_by(|&a, &b| {
        let (da, db) = (&shapes.districts[a], &shapes.districts[b]);
        (&da.state, &da.name).cmp(&(&db.state, &db.name))
    });
    let mut ids = vec![0; shapes.len()];
    for (id, &i) in order.iter().enumerate() {
        ids[i] = id as u32;
    }
    ids
}

/// Inner join of yields with zonal features on `(district, year)`.
///
/// Features for harvest year `Y` come from calendar year `Y - sowing_year_offset`.
/// Yield rows that do not link to a polygon, that repeat a `(district, year)`
/// key, or that miss any feature are excluded and listed in `exclusions`.
pub fn build_feature_table(
    cube: &ZonalCube,
    schema: &FeatureSchema,
    shapes: &DistrictSet,
    yields: &[YieldRecord],
    linkage: &Linkage,
    sowing_year_offset: i32,
    inputs: InputSet,
) -> Result<FeatureTable, DatasetError> {
    let ids = district_ids(shapes);
    let eo_columns = schema.eo_columns();
    let mut exclusions = Vec::new();
    let mut by_key: BTreeMap<(u32, i32), (FeatureRow, &YieldRecord)> = BTreeMap::new();
    let mut duplicates: Vec<&YieldRecord> = Vec::new();

    for rec in yields {
        let exclude = |reason: String| Exclusion {
            state: rec.state.clone(),
            district: rec.district.clone(),
            year: rec.year,
            reason,
        };
        let Some(shape) = linkage.shape_index(&rec.state, &rec.district) else {
            exclusions.push(exclude("unmatched district".into()));
            continue;
        };
        let feature_year = rec.year - sowing_year_offset;
        let mut eo = Vec::with_capacity(eo_columns.len());
        let mut missing = None;
        'vars: for var in &schema.variables {
            for &m in &schema.months {
                match cube.get(shape, var, feature_year, m) {
                    Some(v) => eo.push(v),
                    None => {
                        missing = Some(format!("{var}_{}", month_abbrev(m)));
                        break 'vars;
                    }
                }
            }
        }
        if let Some(col) = missing {
            exclusions.push(exclude(format!("missing {col}")));
            continue;
        }
        let d = &shapes.districts[shape];
        let key = (ids[shape], rec.year);
        let row = FeatureRow {
            district_id: ids[shape],
            state: d.state.clone(),
            district: d.name.clone(),
            year: rec.year,
            eo,
            target: rec.yield_t_ha,
        };
        match by_key.get(&key) {
            // Keep the lexicographically smallest source spelling so the
            // result does not depend on input order.
            Some((_, kept)) if (&kept.state, &kept.district, kept.yield_t_ha.to_bits())
                <= (&rec.state, &rec.district, rec.yield_t_ha.to_bits()) =>
            {
                duplicates.push(rec);
            }
            Some(_) => {
                let (_, old) = by_key.insert(key, (row, rec)).expect("present");
                duplicates.push(old);
            }
            None => {
                by_key.insert(key, (row, rec));
            }
        }
    }
    for rec in duplicates {
        exclusions.push(Exclusion {
            state: rec.state.clone(),
            district: rec.district.clone(),
            year: rec.year,
            reason: "duplicate district-year".into(),
        });
    }
    exclusions.sort_by(|a, b| (&a.state, &a.district, a.year, &a.reason).cmp(&(&b.state, &b.district, b.year, &b.reason)));
    if !exclusions.is_empty() {
        info!("features: {} yield rows excluded", exclusions.len());
    }
    let rows: Vec<FeatureRow> = by_key.into_values().map(|(r, _)| r).collect();
    if rows.is_empty() {
        return Err(DatasetError::EmptyJoin);
    }
    Ok(FeatureTable { eo_columns, inputs, rows, exclusions })
}
