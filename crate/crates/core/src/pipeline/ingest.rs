//! Reading rasters, polygons and yield tables into memory.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use log::{debug, info};

use crate::dataset::{monthly_mean_grid, parse_yield_csv, ParsedYields, ZonalCube};
use crate::geodata::{rasterize_districts, zonal_means, DistrictSet, GridHeader, LabelGrid, RasterGrid};
use crate::matching::AliasTable;

use super::config::RunConfig;

pub struct Inputs {
    pub shapes: DistrictSet,
    pub yields: ParsedYields,
    pub aliases: AliasTable,
}

fn read(path: &Path) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

pub fn read_shapes(cfg: &RunConfig) -> Result<DistrictSet, String> {
    let path = cfg.resolve(&cfg.paths.districts);
    DistrictSet::parse_geojson(&read(&path)?, &cfg.names).map_err(|e| format!("{}: {e}", path.display()))
}

pub fn read_inputs(cfg: &RunConfig) -> Result<Inputs, String> {
    let shapes = read_shapes(cfg)?;
    let ypath = cfg.resolve(&cfg.paths.yields);
    let yields = parse_yield_csv(&read(&ypath)?, &cfg.yield_columns, &cfg.yield_filter()).map_err(|e| format!("{}: {e}", ypath.display()))?;
    info!(
        "ingest: {} districts, {} yield rows ({} skipped, {} other season/crop)",
        shapes.districts.len(),
        yields.records.len(),
        yields.skipped,
        yields.filtered
    );
    let aliases = match &cfg.paths.aliases {
        Some(p) => {
            let p = cfg.resolve(p);
            AliasTable::parse_csv(&read(&p)?).map_err(|e| format!("{}: {e}", p.display()))?
        }
        None => AliasTable::default(),
    };
    Ok(Inputs { shapes, yields, aliases })
}

fn read_grid(path: &Path) -> Result<RasterGrid, String> {
    RasterGrid::parse_ascii(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))
}

/// Monthly grid for one variable: `<MM>.asc`, or the mean of the daily
/// grids in `<MM>/<DD>.asc`. `None` when neither exists.
pub fn load_month(root: &Path, variable: &str, year: i32, month: u32) -> Result<Option<RasterGrid>, String> {
    let dir = root.join(variable).join(year.to_string());
    let monthly = dir.join(format!("{month:02}.asc"));
    if monthly.is_file() {
        return read_grid(&monthly).map(Some);
    }
    let daily_dir = dir.join(format!("{month:02}"));
    if !daily_dir.is_dir() {
        return Ok(None);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(&daily_dir)
        .map_err(|e| format!("{}: {e}", daily_dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "asc"))
        .collect();
    files.sort();
    let mut daily = Vec::with_capacity(files.len());
    for f in files {
        let day: u32 = f
            .file_stem()
            .and_then(|s| s.to_str())
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format!("{}: daily file name is not a day number", f.display()))?;
        let date = NaiveDate::from_ymd_opt(year, month, day).ok_or_else(|| format!("{}: invalid date", f.display()))?;
        daily.push((date, read_grid(&f)?));
    }
    Ok(monthly_mean_grid(&daily, month, year))
}

/// District means for every (variable, year, month) raster that exists.
/// `years` are calendar years of the rasters.
pub fn build_cube(cfg: &RunConfig, shapes: &DistrictSet, years: &BTreeSet<i32>) -> Result<ZonalCube, String> {
    let root = cfg.resolve(&cfg.paths.rasters);
    let mask = match &cfg.paths.crop_mask {
        Some(p) => Some(read_grid(&cfg.resolve(p))?),
        None => None,
    };
    let n = shapes.districts.len();
    let mut labels: Vec<(GridHeader, LabelGrid)> = Vec::new();
    let mut cube = ZonalCube::default();
    let mut loaded = 0usize;
    let mut missing = 0usize;
    for var in &cfg.variables {
        let masked = cfg.mask.variables.iter().any(|v| v == var);
        for &year in years {
            for &month in &cfg.months {
                let Some(mut grid) = load_month(&root, var, year, month)? else {
                    missing += 1;
                    continue;
                };
                if masked {
                    if let Some(m) = &mask {
                        grid = grid.apply_crop_mask(m, cfg.mask.min_area).map_err(|e| format!("crop mask for {var} {year}-{month:02}: {e}"))?;
                    }
                }
                let idx = match labels.iter().position(|(h, _)| h.same_geometry(&grid.header)) {
                    Some(i) => i,
                    None => {
                        labels.push((grid.header.clone(), rasterize_districts(&grid.header, shapes)));
                        labels.len() - 1
                    }
                };
                for (d, v) in zonal_means(&grid, &labels[idx].1, n).into_iter().enumerate() {
                    if let Some(v) = v {
                        cube.insert(d, var, year, month, v);
                    }
                }
                loaded += 1;
            }
        }
    }
    if loaded == 0 {
        return Err(format!("no rasters found under {}", root.display()));
    }
    for (_, l) in &labels {
        let empty: Vec<&str> = (0..n).filter(|&d| l.cell_count(d) == 0).map(|d| shapes.districts[d].name.as_str()).collect();
        if !empty.is_empty() {
            log::warn!("ingest: {} districts cover no raster cell", empty.len());
        }
    }
    debug!("ingest: {loaded} monthly grids loaded, {missing} absent");
    info!("ingest: {} district-month values", cube.len());
    Ok(cube)
}
