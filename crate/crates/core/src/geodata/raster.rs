//! ESRI ASCII grids.

use std::fmt::Write as _;

use super::GeoError;

const HEADER_KEYS: [&str; 6] = [
    "ncols",
    "nrows",
    "xllcorner",
    "yllcorner",
    "cellsize",
    "nodata_value",
];

/// Georeferencing of a grid. Coordinates are geographic degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridHeader {
    pub ncols: usize,
    pub nrows: usize,
    /// Longitude of the lower-left corner.
    pub xll: f64,
    /// Latitude of the lower-left corner.
    pub yll: f64,
    pub cellsize: f64,
    pub nodata: f64,
}

impl GridHeader {
    pub fn new(ncols: usize, nrows: usize, xll: f64, yll: f64, cellsize: f64, nodata: f64) -> Result<Self, GeoError> {
        let header = Self { ncols, nrows, xll, yll, cellsize, nodata };
        header.validate()?;
        Ok(header)
    }

    fn validate(&self) -> Result<(), GeoError> {
        if self.ncols == 0 || self.nrows == 0 {
            return Err(GeoError::Grid { line: 1, msg: "ncols and nrows must be at least 1".into() });
        }
        if !(self.cellsize > 0.0) || !self.cellsize.is_finite() {
            return Err(GeoError::Grid { line: 5, msg: format!("cellsize must be positive, got {}", self.cellsize) });
        }
        if !self.xll.is_finite() || !self.yll.is_finite() {
            return Err(GeoError::Grid { line: 3, msg: "corner coordinates must be finite".into() });
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.ncols * self.nrows
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Center of cell `(row, col)`; row 0 is the northernmost row.
    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        let x = self.xll + (col as f64 + 0.5) * self.cellsize;
        let y = self.yll + (self.nrows as f64 - row as f64 - 0.5) * self.cellsize;
        (x, y)
    }

    /// Same extent and resolution. The nodata sentinel is not compared.
    pub fn same_geometry(&self, other: &GridHeader) -> bool {
        self.ncols == other.ncols
            && self.nrows == other.nrows
            && self.xll == other.xll
            && self.yll == other.yll
            && self.cellsize == other.cellsize
    }

    /// Row/column ranges whose cell centers can fall inside the box.
    pub(crate) fn cells_within(&self, min: (f64, f64), max: (f64, f64)) -> Option<(std::ops::Range<usize>, std::ops::Range<usize>)> {
        let col_lo = ((min.0 - self.xll) / self.cellsize - 0.5).floor().max(0.0);
        let col_hi = ((max.0 - self.xll) / self.cellsize - 0.5).ceil() + 1.0;
        let top = self.yll + self.nrows as f64 * self.cellsize;
        let row_lo = ((top - max.1) / self.cellsize - 0.5).floor().max(0.0);
        let row_hi = ((top - min.1) / self.cellsize - 0.5).ceil() + 1.0;
        let clamp = |v: f64, n: usize| (v.max(0.0) as usize).min(n);
        let cols = clamp(col_lo, self.ncols)..clamp(col_hi, self.ncols);
        let rows = clamp(row_lo, self.nrows)..clamp(row_hi, self.nrows);
        if cols.is_empty() || rows.is_empty() {
            None
        } else {
            Some((rows, cols))
        }
    }
}

/// A georeferenced grid of values stored row-major, top row first.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterGrid {
    pub header: GridHeader,
    pub values: Vec<f64>,
}

impl RasterGrid {
    pub fn new(header: GridHeader, values: Vec<f64>) -> Result<Self, GeoError> {
        header.validate()?;
        if values.len() != header.len() {
            return Err(GeoError::Grid {
                line: 0,
                msg: format!("expected {} values, got {}", header.len(), values.len()),
            });
        }
        Ok(Self { header, values })
    }

    pub fn filled(header: GridHeader, value: f64) -> Self {
        Self { values: vec![value; header.len()], header }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.header.ncols + col]
    }

    pub fn is_nodata(&self, value: f64) -> bool {
        value.is_nan() || value == self.header.nodata
    }

    /// Parses an ESRI ASCII grid. The six header keys must appear in the
    /// canonical order; each data line holds exactly one grid row.
    pub fn parse_ascii(text: &str) -> Result<Self, GeoError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut header_values = [0.0f64; 6];
        for (slot, key) in HEADER_KEYS.iter().enumerate() {
            let (line_no, line) = lines
                .by_ref()
                .find(|(_, l)| !l.trim().is_empty())
                .ok_or_else(|| GeoError::Grid { line: 0, msg: format!("missing header key {key}") })?;
            let mut parts = line.split_whitespace();
            let found = parts.next().unwrap_or_default();
            if !found.eq_ignore_ascii_case(key) {
                return Err(GeoError::Grid { line: line_no, msg: format!("expected header key {key}, found {found:?}") });
            }
            let raw = parts
                .next()
                .ok_or_else(|| GeoError::Grid { line: line_no, msg: format!("header key {key} has no value") })?;
            if parts.next().is_some() {
                return Err(GeoError::Grid { line: line_no, msg: format!("trailing tokens after {key}") });
            }
            header_values[slot] = raw
                .parse::<f64>()
                .map_err(|_| GeoError::Grid { line: line_no, msg: format!("non-numeric value {raw:?} for {key}") })?;
        }
        let count = |v: f64, line: usize, key: &str| -> Result<usize, GeoError> {
            if v.fract() != 0.0 || v < 1.0 {
                return Err(GeoError::Grid { line, msg: format!("{key} must be a positive integer, got {v}") });
            }
            Ok(v as usize)
        };
        let header = GridHeader {
            ncols: count(header_values[0], 1, "ncols")?,
            nrows: count(header_values[1], 2, "nrows")?,
            xll: header_values[2],
            yll: header_values[3],
            cellsize: header_values[4],
            nodata: header_values[5],
        };
        header.validate()?;

        let mut values = Vec::with_capacity(header.len());
        let mut rows_read = 0;
        for (line_no, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            if rows_read == header.nrows {
                return Err(GeoError::Grid { line: line_no, msg: format!("more than {} data rows", header.nrows) });
            }
            let before = values.len();
            for token in line.split_whitespace() {
                let v = token
                    .parse::<f64>()
                    .map_err(|_| GeoError::Grid { line: line_no, msg: format!("non-numeric token {token:?}") })?;
                values.push(v);
            }
            let got = values.len() - before;
            if got != header.ncols {
                return Err(GeoError::Grid {
                    line: line_no,
                    msg: format!("row has {got} values, header declares {} columns", header.ncols),
                });
            }
            rows_read += 1;
        }
        if rows_read != header.nrows {
            return Err(GeoError::Grid {
                line: text.lines().count(),
                msg: format!("found {rows_read} data rows, header declares {}", header.nrows),
            });
        }
        Ok(Self { header, values })
    }

    pub fn to_ascii(&self) -> String {
        let h = &self.header;
        let mut out = String::with_capacity(h.len() * 10 + 128);
        let _ = writeln!(out, "ncols {}", h.ncols);
        let _ = writeln!(out, "nrows {}", h.nrows);
        let _ = writeln!(out, "xllcorner {}", h.xll);
        let _ = writeln!(out, "yllcorner {}", h.yll);
        let _ = writeln!(out, "cellsize {}", h.cellsize);
        let _ = writeln!(out, "NODATA_value {}", h.nodata);
        for row in self.values.chunks(h.ncols) {
            let mut first = true;
            for v in row {
                if !first {
                    out.push(' ');
                }
                first = false;
                let _ = write!(out, "{v}");
            }
            out.push('\n');
        }
        out
    }

    /// Cells whose mask value is at most `min_area`, or nodata in the mask,
    /// become nodata in the returned copy.
    pub fn apply_crop_mask(&self, mask: &RasterGrid, min_area: f64) -> Result<RasterGrid, GeoError> {
        if !self.header.same_geometry(&mask.header) {
            return Err(GeoError::HeaderMismatch);
        }
        let nodata = self.header.nodata;
        let values = self
            .values
            .iter()
            .zip(&mask.values)
            .map(|(&v, &m)| if mask.is_nodata(m) || m <= min_area { nodata } else { v })
            .collect();
        Ok(RasterGrid { header: self.header, values })
    }
}
