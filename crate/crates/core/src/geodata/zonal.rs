use log::warn;

use super::raster::{GridHeader, RasterGrid};
use super::vector::DistrictSet;

/// Per-cell district index, computed once per grid geometry so every
/// zonal pass is a single scan.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelGrid {
    pub header: GridHeader,
    pub labels: Vec<Option<u32>>,
}

impl LabelGrid {
    pub fn cell_count(&self, district: usize) -> usize {
        self.labels.iter().filter(|l| **l == Some(district as u32)).count()
    }
}

/// Labels each cell with the first district (in input order) containing
/// its center. Cells claimed by more than one district are logged.
pub fn rasterize_districts(header: &GridHeader, districts: &DistrictSet) -> LabelGrid {
    let mut labels: Vec<Option<u32>> = vec![None; header.len()];
    let mut overlaps = 0usize;
    for (index, district) in districts.districts.iter().enumerate() {
        let Some((min, max)) = district.bbox() else { continue };
        let Some((rows, cols)) = header.cells_within(min, max) else { continue };
        for row in rows {
            for col in cols.clone() {
                let (x, y) = header.cell_center(row, col);
                if !district.contains(x, y) {
                    continue;
                }
                let slot = &mut labels[row * header.ncols + col];
                match slot {
                    None => *slot = Some(index as u32),
                    Some(_) => overlaps += 1,
                }
            }
        }
    }
    if overlaps > 0 {
        warn!("rasterize: {overlaps} cell centers fall in more than one district; first district kept");
    }
    LabelGrid { header: *header, labels }
}

/// Mean of the non-nodata cells labelled `district`, or `None` when there are none.
pub fn zonal_mean(grid: &RasterGrid, labels: &LabelGrid, district: usize) -> Option<f64> {
    assert!(grid.header.same_geometry(&labels.header), "grid and label grid differ in geometry");
    let target = Some(district as u32);
    let mut sum = 0.0;
    let mut n = 0usize;
    for (&v, &label) in grid.values.iter().zip(&labels.labels) {
        if label == target && !grid.is_nodata(v) {
            sum += v;
            n += 1;
        }
    }
    (n > 0).then(|| sum / n as f64)
}

/// [`zonal_mean`] for every district in one pass.
pub fn zonal_means(grid: &RasterGrid, labels: &LabelGrid, n_districts: usize) -> Vec<Option<f64>> {
    assert!(grid.header.same_geometry(&labels.header), "grid and label grid differ in geometry");
    let mut sums = vec![0.0; n_districts];
    let mut counts = vec![0usize; n_districts];
    for (&v, &label) in grid.values.iter().zip(&labels.labels) {
        if let Some(l) = label {
            let l = l as usize;
            if l < n_districts && !grid.is_nodata(v) {
                sums[l] += v;
                counts[l] += 1;
            }
        }
    }
    sums.into_iter()
        .zip(counts)
        .map(|(s, c)| (c > 0).then(|| s / c as f64))
        .collect()
}
