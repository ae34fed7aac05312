//! District-level crop yield forecasting.
//!
//! Gridded climate and vegetation rasters are aggregated to district
//! polygons, joined to yield records by fuzzy name matching, and turned into
//! a monthly feature table. Nine regression families are trained on a
//! chronological split, scored, explained with Shapley values, and exported
//! as a dashboard bundle.

pub mod dashboard;
pub mod dataset;
pub mod evaluation;
pub mod explain;
pub mod geodata;
pub mod matching;
pub mod matrix;
pub mod pipeline;
pub mod models;
