//! Rasters, district polygons and zonal aggregation.
//!
//! A cell belongs to a district when its center lies inside the district
//! under the even-odd rule (see [`point_in_polygon`] for the boundary tie
//! rule). Zonal means are unweighted means of the non-nodata cells.

mod raster;
mod vector;
mod zonal;

pub use raster::{GridHeader, RasterGrid};
pub use vector::{point_in_polygon, rect_ring, District, DistrictSet, NameKeys, Polygon, Ring};
pub use zonal::{rasterize_districts, zonal_mean, zonal_means, LabelGrid};

#[derive(Debug, thiserror::Error)]
pub enum GeoError {
    #[error("grid line {line}: {msg}")]
    Grid { line: usize, msg: String },
    #[error("grid headers differ in extent or resolution")]
    HeaderMismatch,
    #[error("geojson: {0}")]
    GeoJson(String),
    #[error("feature {feature}: missing string property {key:?}")]
    MissingProperty { feature: usize, key: String },
    #[error("feature {feature}: unsupported geometry type {kind:?}")]
    UnsupportedGeometry { feature: usize, kind: String },
    #[error("feature {feature}: ring is not closed or has fewer than 4 vertices")]
    UnclosedRing { feature: usize },
    #[error("duplicate district {district:?} in state {state:?}")]
    DuplicateDistrict { state: String, district: String },
}
