//! Deterministic synthetic world for end-to-end runs.
//!
//! Districts are equal squares on a regular grid, grouped into contiguous
//! states. Each `(variable, year)` pair is a sequence of smooth random fields
//! plus cell noise, with AR(1) correlation 0.8 from one month to the next;
//! years and variables are independent. Yield is generated from the district means
//! that the pipeline itself recovers, so the ground truth is known exactly:
//!
//! ```text
//! signal = 2.0 + 0.8·z(t2m_aug) + 0.5·z(swvl1_aug) + 0.4·z(lai_aug)·z(t2m_aug)
//!        + 0.3·z(ndvi_sep) + 0.25·z(district_rank)
//! yield  = max(0.1, signal + N(0, noise_sigma))
//! ```
//!
//! `z` standardizes over all generated district-years; `district_rank` is the
//! district's position in sorted `(state, district)` order, giving each district
//! a fixed effect. The 0.1 t/ha floor keeps yields positive.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::features::{district_ids, DEFAULT_VARIABLES};
use super::DatasetError;
use crate::geodata::{rasterize_districts, rect_ring, zonal_means, District, DistrictSet, GridHeader, NameKeys, Polygon, RasterGrid};
use crate::matching::similarity;

pub const CELLS_PER_SIDE: usize = 3;
pub const CELLSIZE: f64 = 0.05;
pub const ORIGIN: (f64, f64) = (75.0, 15.0);
pub const NODATA: f64 = -9999.0;
pub const MASKED_VARIABLES: [&str; 1] = ["ndvi"];
const YIELD_FLOOR: f64 = 0.1;
const DISTRICT_EFFECT: f64 = 0.25;
/// Lag-one correlation between consecutive monthly fields of one variable.
const MONTH_CORRELATION: f64 = 0.8;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    pub seed: u64,
    pub n_districts: usize,
    pub first_year: i32,
    pub last_year: i32,
    pub noise_sigma: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self { seed: 42, n_districts: 250, first_year: 2001, last_year: 2020, noise_sigma: 0.3 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthGrid {
    pub variable: String,
    pub year: i32,
    pub month: u32,
    pub grid: RasterGrid,
}

/// Noiseless and observed yield for one district-year (polygon names).
#[derive(Debug, Clone, PartialEq)]
pub struct TruthRow {
    pub state: String,
    pub district: String,
    pub year: i32,
    pub signal: f64,
    pub observed: f64,
}

#[derive(Debug, Clone)]
pub struct SynthWorld {
    pub params: SynthParams,
    pub districts: DistrictSet,
    pub crop_mask: RasterGrid,
    pub grids: Vec<SynthGrid>,
    pub yield_csv: String,
    pub truth: Vec<TruthRow>,
}

struct VariableModel {
    name: &'static str,
    mean: f64,
    seasonal_amp: f64,
    sd: f64,
    decimals: usize,
    min: f64,
    max: f64,
}

const VARIABLE_MODELS: [VariableModel; 7] = [
    VariableModel { name: "pev", mean: -0.0055, seasonal_amp: 0.0015, sd: 0.0012, decimals: 7, min: -1.0, max: 0.0 },
    VariableModel { name: "t2m", mean: 298.5, seasonal_amp: 1.5, sd: 1.5, decimals: 3, min: 250.0, max: 330.0 },
    VariableModel { name: "tp", mean: 0.003, seasonal_amp: 0.007, sd: 0.002, decimals: 6, min: 0.0, max: 1.0 },
    VariableModel { name: "lai", mean: 1.4, seasonal_amp: 1.6, sd: 0.6, decimals: 3, min: 0.0, max: 8.0 },
    VariableModel { name: "sp", mean: 96_000.0, seasonal_amp: -300.0, sd: 600.0, decimals: 1, min: 50_000.0, max: 110_000.0 },
    VariableModel { name: "swvl1", mean: 0.22, seasonal_amp: 0.12, sd: 0.05, decimals: 4, min: 0.0, max: 0.7 },
    VariableModel { name: "ndvi", mean: 0.35, seasonal_amp: 0.3, sd: 0.1, decimals: 4, min: -1.0, max: 1.0 },
];

const SYLLABLES: [&str; 40] = [
    "ka", "ri", "pur", "ba", "dha", "nag", "ma", "la", "so", "ta", "ran", "gi", "vel", "ko", "nda", "sha", "mu", "rad",
    "bal", "ju", "tir", "pa", "ne", "hor", "da", "vi", "sam", "che", "lo", "gar", "bhi", "wan", "ze", "kul", "ram",
    "mo", "tan", "ha", "sur", "yel",
];

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().collect::<String>() + c.as_str(),
        None => String::new(),
    }
}

fn make_word(rng: &mut ChaCha8Rng, syllables: usize) -> String {
    let mut w = String::new();
    for _ in 0..syllables {
        w.push_str(SYLLABLES.choose(rng).expect("non-empty"));
    }
    capitalize(&w)
}

/// Unique names, at least `min_len` letters, pairwise similarity below 70.
fn make_names(rng: &mut ChaCha8Rng, count: usize, min_len: usize, two_word_share: f64) -> Vec<String> {
    let mut names: Vec<String> = Vec::with_capacity(count);
    while names.len() < count {
        let candidate = if rng.random::<f64>() < two_word_share {
            format!("{} {}", make_word(rng, 2), make_word(rng, 2))
        } else {
            let n = rng.random_range(3..=4);
            make_word(rng, n)
        };
        if candidate.replace(' ', "").len() < min_len {
            continue;
        }
        if names.iter().all(|n| similarity(n, &candidate) < 70) {
            names.push(candidate);
        }
    }
    names
}

/// A spelling variant one cheap edit away, as found between agency tables and shapefiles.
fn spelling_variant(rng: &mut ChaCha8Rng, name: &str) -> String {
    let variant = match rng.random_range(0..4) {
        0 => name.to_uppercase(),
        1 => name.replace(' ', "  ") + " ",
        2 if name.contains(' ') => name.replace(' ', ""),
        _ => {
            let chars: Vec<char> = name.chars().collect();
            let at = rng.random_range(1..chars.len() - 1);
            if chars[at] == ' ' {
                name.to_lowercase()
            } else {
                chars.iter().enumerate().filter(|(i, _)| *i != at).map(|(_, c)| c).collect()
            }
        }
    };
    if similarity(&variant, name) >= 88 {
        variant
    } else {
        name.to_uppercase()
    }
}

fn round_to(v: f64, decimals: usize) -> f64 {
    format!("{v:.decimals$}").parse().expect("formatted float parses")
}

/// Sum of a few random plane waves plus cell noise; roughly unit variance.
fn smooth_field(rng: &mut ChaCha8Rng, header: &GridHeader) -> Vec<f64> {
    const WAVES: usize = 6;
    let extent_x = header.ncols as f64;
    let extent_y = header.nrows as f64;
    let waves: Vec<(f64, f64, f64, f64)> = (0..WAVES)
        .map(|_| {
            let amp: f64 = StandardNormal.sample(rng);
            let fx = rng.random_range(-2.5..2.5) / extent_x;
            let fy = rng.random_range(-2.5..2.5) / extent_y;
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            (amp * (2.0 / WAVES as f64).sqrt(), fx, fy, phase)
        })
        .collect();
    let noise = Normal::new(0.0, 0.3).expect("valid sd");
    let mut out = Vec::with_capacity(header.len());
    for r in 0..header.nrows {
        for c in 0..header.ncols {
            let mut v = 0.0;
            for &(a, fx, fy, ph) in &waves {
                v += a * (std::f64::consts::TAU * (fx * c as f64 + fy * r as f64) + ph).cos();
            }
            out.push(v + noise.sample(rng));
        }
    }
    out
}

fn standardize(values: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let sd = if sd > 0.0 { sd } else { 1.0 };
    values.iter().map(|v| (v - mean) / sd).collect()
}

pub fn synth_generate(params: &SynthParams) -> Result<SynthWorld, DatasetError> {
    if params.n_districts < 2 {
        return Err(DatasetError::InvalidSynth("at least 2 districts required".into()));
    }
    if params.last_year - params.first_year + 1 < 4 {
        return Err(DatasetError::InvalidSynth("at least 4 years required".into()));
    }
    if !(params.noise_sigma >= 0.0) || !params.noise_sigma.is_finite() {
        return Err(DatasetError::InvalidSynth("noise_sigma must be finite and non-negative".into()));
    }
    let n = params.n_districts;
    let years: Vec<i32> = (params.first_year..=params.last_year).collect();
    let months: Vec<u32> = (5..=11).collect();

    // Layout.
    let per_row = (n as f64).sqrt().ceil() as usize;
    let block_rows = n.div_ceil(per_row);
    let header = GridHeader::new(per_row * CELLS_PER_SIDE, block_rows * CELLS_PER_SIDE, ORIGIN.0, ORIGIN.1, CELLSIZE, NODATA)
        .expect("valid synthetic header");
    let n_states = (n / 25).clamp(1, 36);
    let mut name_rng = stream_rng(params.seed, 1);
    let state_names = make_names(&mut name_rng, n_states, 6, 0.3);
    let district_names = make_names(&mut name_rng, n, 8, 0.3);
    let side = CELLS_PER_SIDE as f64 * CELLSIZE;
    let districts = DistrictSet::new(
        (0..n)
            .map(|i| {
                let (bx, by) = ((i % per_row) as f64, (i / per_row) as f64);
                // Block rows count up from the south edge.
                let x0 = ORIGIN.0 + bx * side;
                let y0 = ORIGIN.1 + by * side;
                District {
                    name: district_names[i].clone(),
                    state: state_names[i * n_states / n].clone(),
                    polygons: vec![Polygon { rings: vec![rect_ring(x0, y0, x0 + side, y0 + side)] }],
                }
            })
            .collect(),
    )
    .expect("generated names are unique");

    // Crop mask: about a fifth of the cells carry no rice, district centers always do.
    let labels = rasterize_districts(&header, &districts);
    let mut mask_rng = stream_rng(params.seed, 2);
    let mut mask_values = Vec::with_capacity(header.len());
    for row in 0..header.nrows {
        for col in 0..header.ncols {
            let center = row % CELLS_PER_SIDE == 1 && col % CELLS_PER_SIDE == 1;
            let area = if !center && mask_rng.random::<f64>() < 0.2 { 0.0 } else { mask_rng.random_range(50.0..2500.0) };
            mask_values.push(round_to(area, 1));
        }
    }
    let crop_mask = RasterGrid::new(header, mask_values).expect("sized to header");

    // EO rasters and their district means.
    let mut field_rng = stream_rng(params.seed, 3);
    let mut grids = Vec::new();
    // means[var][year_idx][month_idx][district]
    let mut means = vec![vec![vec![Vec::new(); months.len()]; years.len()]; VARIABLE_MODELS.len()];
    for (vi, model) in VARIABLE_MODELS.iter().enumerate() {
        for (yi, &year) in years.iter().enumerate() {
            let mut field: Vec<f64> = Vec::new();
            for (mi, &month) in months.iter().enumerate() {
                let seasonal = (std::f64::consts::PI * (month as f64 - 5.0) / 6.0).sin();
                let base = model.mean + model.seasonal_amp * seasonal;
                let fresh = smooth_field(&mut field_rng, &header);
                field = if mi == 0 {
                    fresh
                } else {
                    let keep = (1.0 - MONTH_CORRELATION * MONTH_CORRELATION).sqrt();
                    field.iter().zip(&fresh).map(|(p, f)| MONTH_CORRELATION * p + keep * f).collect()
                };
                let values = field
                    .iter()
                    .map(|f| round_to((base + model.sd * f).clamp(model.min, model.max), model.decimals))
                    .collect();
                let grid = RasterGrid::new(header, values).expect("sized to header");
                let aggregated = if MASKED_VARIABLES.contains(&model.name) {
                    grid.apply_crop_mask(&crop_mask, 0.0).expect("same header")
                } else {
                    grid.clone()
                };
                means[vi][yi][mi] = zonal_means(&aggregated, &labels, n)
                    .into_iter()
                    .map(|m| m.expect("every synthetic district has an unmasked center cell"))
                    .collect();
                grids.push(SynthGrid { variable: model.name.to_owned(), year, month, grid });
            }
        }
    }

    // Ground truth over the district-year population.
    let var_index = |name: &str| DEFAULT_VARIABLES.iter().position(|v| *v == name).expect("known variable");
    let column = |var: &str, month: u32| -> Vec<f64> {
        let vi = var_index(var);
        let mi = months.iter().position(|m| *m == month).expect("month generated");
        let mut v = Vec::with_capacity(n * years.len());
        for d in 0..n {
            for yi in 0..years.len() {
                v.push(means[vi][yi][mi][d]);
            }
        }
        standardize(&v)
    };
    let z_t2m = column("t2m", 8);
    let z_swvl1 = column("swvl1", 8);
    let z_lai = column("lai", 8);
    let z_ndvi = column("ndvi", 9);
    let ranks: Vec<f64> = district_ids(&districts).iter().map(|&r| r as f64).collect();
    let z_rank = standardize(&ranks);

    let mut noise_rng = stream_rng(params.seed, 4);
    let noise = Normal::new(0.0, params.noise_sigma.max(f64::MIN_POSITIVE)).expect("valid sd");
    let mut table_rng = stream_rng(params.seed, 5);
    let variants: Vec<String> = districts
        .districts
        .iter()
        .map(|d| if table_rng.random::<f64>() < 0.2 { spelling_variant(&mut table_rng, &d.name) } else { d.name.clone() })
        .collect();

    let mut truth = Vec::with_capacity(n * years.len());
    let mut csv = String::from("State,District,Crop,Season,Year,Area,Production,Yield\n");
    for (d, district) in districts.districts.iter().enumerate() {
        for (yi, &year) in years.iter().enumerate() {
            let k = d * years.len() + yi;
            let signal = (2.0
                + 0.8 * z_t2m[k]
                + 0.5 * z_swvl1[k]
                + 0.4 * z_lai[k] * z_t2m[k]
                + 0.3 * z_ndvi[k]
                + DISTRICT_EFFECT * z_rank[d])
                .max(YIELD_FLOOR);
            let eps = if params.noise_sigma > 0.0 { noise.sample(&mut noise_rng) } else { 0.0 };
            let observed = (signal + eps).max(YIELD_FLOOR);
            let area = table_rng.random_range(5_000.0f64..150_000.0).round();
            let _ = writeln!(
                csv,
                "{},{},Rice,Kharif,{year},{area},{},{observed}",
                district.state,
                variants[d],
                area * observed
            );
            if table_rng.random::<f64>() < 0.1 {
                let y = table_rng.random_range(1.0f64..4.0);
                let _ = writeln!(csv, "{},{},Rice,Rabi,{year},{area},{},{y}", district.state, variants[d], area * y);
            }
            truth.push(TruthRow { state: district.state.clone(), district: district.name.clone(), year, signal, observed });
        }
    }

    Ok(SynthWorld { params: params.clone(), districts, crop_mask, grids, yield_csv: csv, truth })
}

impl SynthWorld {
    /// Writes `rasters/<var>/<year>/<MM>.asc`, `crop_mask.asc`,
    /// `districts.geojson`, `yields.csv` and `truth.csv` under `dir`.
    pub fn write_to(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        for g in &self.grids {
            let sub = dir.join("rasters").join(&g.variable).join(g.year.to_string());
            fs::create_dir_all(&sub)?;
            fs::write(sub.join(format!("{:02}.asc", g.month)), g.grid.to_ascii())?;
        }
        fs::write(dir.join("crop_mask.asc"), self.crop_mask.to_ascii())?;
        let geojson = serde_json::to_string(&self.districts.to_geojson(&NameKeys::default()))?;
        fs::write(dir.join("districts.geojson"), geojson)?;
        fs::write(dir.join("yields.csv"), &self.yield_csv)?;
        let mut truth = String::from("state,district,year,signal,yield\n");
        for t in &self.truth {
            let _ = writeln!(truth, "{},{},{},{},{}", t.state, t.district, t.year, t.signal, t.observed);
        }
        fs::write(dir.join("truth.csv"), truth)?;
        Ok(())
    }
}

/// Reads `truth.csv` as written by [`SynthWorld::write_to`].
pub fn read_truth(text: &str) -> Result<Vec<TruthRow>, DatasetError> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| DatasetError::Csv(e.to_string()))?;
        let num = |i: usize| rec.get(i).and_then(|s| s.parse::<f64>().ok()).ok_or_else(|| DatasetError::Csv("bad truth row".into()));
        rows.push(TruthRow {
            state: rec.get(0).unwrap_or_default().to_owned(),
            district: rec.get(1).unwrap_or_default().to_owned(),
            year: rec.get(2).and_then(|s| s.parse().ok()).ok_or_else(|| DatasetError::Csv("bad truth year".into()))?,
            signal: num(3)?,
            observed: num(4)?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64, noise: f64) -> SynthParams {
        SynthParams { seed, n_districts: 12, first_year: 2001, last_year: 2004, noise_sigma: noise }
    }

    #[test]
    fn same_seed_same_world() {
        let a = synth_generate(&small(7, 0.3)).unwrap();
        let b = synth_generate(&small(7, 0.3)).unwrap();
        assert_eq!(a.yield_csv, b.yield_csv);
        assert_eq!(a.grids, b.grids);
        assert_eq!(a.truth, b.truth);
        let c = synth_generate(&small(8, 0.3)).unwrap();
        assert_ne!(a.yield_csv, c.yield_csv);
    }

    #[test]
    fn zero_noise_sits_on_the_surface() {
        let w = synth_generate(&small(3, 0.0)).unwrap();
        assert!(w.truth.iter().all(|t| t.observed == t.signal));
    }

    #[test]
    fn rasters_round_trip_through_text() {
        let w = synth_generate(&small(3, 0.3)).unwrap();
        for g in w.grids.iter().take(20) {
            assert_eq!(RasterGrid::parse_ascii(&g.grid.to_ascii()).unwrap(), g.grid);
        }
        assert_eq!(w.grids.len(), 7 * 4 * 7);
    }

    #[test]
    fn rejects_tiny_worlds() {
        assert!(synth_generate(&SynthParams { n_districts: 1, ..small(1, 0.1) }).is_err());
        assert!(synth_generate(&SynthParams { last_year: 2003, ..small(1, 0.1) }).is_err());
    }

    #[test]
    fn variants_stay_matchable() {
        let mut rng = stream_rng(9, 9);
        for name in ["Koripurdha", "Ranvel Gimu", "Shatirpa"] {
            for _ in 0..20 {
                assert!(similarity(&spelling_variant(&mut rng, name), name) >= 88);
            }
        }
    }
}
