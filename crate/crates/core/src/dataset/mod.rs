//! Yield records, monthly EO features and the modelling table.

mod features;
mod monthly;
mod synth;
mod yields;

pub use features::{
    build_feature_table, district_ids, Exclusion, FeatureRow, FeatureSchema, FeatureTable, InputSet, ZonalCube,
    DEFAULT_MONTHS, DEFAULT_VARIABLES,
};
pub use monthly::{month_abbrev, monthly_mean, monthly_mean_grid, MONTH_ABBREV};
pub use synth::{read_truth, synth_generate, SynthGrid, SynthParams, SynthWorld, TruthRow, MASKED_VARIABLES};
pub use yields::{
    normalize_season, parse_yield_csv, remove_yield_outliers, OutlierScope, ParsedYields, YieldColumns, YieldFilter,
    YieldRecord,
};

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("csv: {0}")]
    Csv(String),
    #[error("yield table has no column {0:?}")]
    MissingColumn(String),
    #[error("no parsable yield rows after filtering")]
    NoRecords,
    #[error("feature table is empty")]
    EmptyTable,
    #[error("join of yields and features produced no rows")]
    EmptyJoin,
    #[error("chronological split leaves the {0} set empty")]
    EmptySplit(&'static str),
    #[error("synthetic generator: {0}")]
    InvalidSynth(String),
}
