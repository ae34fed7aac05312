use chrono::{Datelike, NaiveDate};

use crate::geodata::RasterGrid;

/// Mean of the finite values dated in `(year, month)`, or `None` if there are none.
pub fn monthly_mean(series: &[(NaiveDate, f64)], month: u32, year: i32) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for (date, v) in series {
        if date.year() == year && date.month() == month && v.is_finite() {
            sum += v;
            n += 1;
        }
    }
    (n > 0).then(|| sum / n as f64)
}

/// Cell-wise [`monthly_mean`] over dated grids sharing one geometry.
/// Nodata cells are skipped; a cell with no valid day stays nodata.
pub fn monthly_mean_grid(daily: &[(NaiveDate, RasterGrid)], month: u32, year: i32) -> Option<RasterGrid> {
    let in_month: Vec<&RasterGrid> = daily
        .iter()
        .filter(|(d, _)| d.year() == year && d.month() == month)
        .map(|(_, g)| g)
        .collect();
    let first = *in_month.first()?;
    if in_month.iter().any(|g| !g.header.same_geometry(&first.header)) {
        return None;
    }
    let nodata = first.header.nodata;
    let values = (0..first.values.len())
        .map(|cell| {
            let mut sum = 0.0;
            let mut n = 0usize;
            for g in &in_month {
                let v = g.values[cell];
                if !g.is_nodata(v) {
                    sum += v;
                    n += 1;
                }
            }
            if n > 0 {
                sum / n as f64
            } else {
                nodata
            }
        })
        .collect();
    Some(RasterGrid { header: first.header, values })
}

pub const MONTH_ABBREV: [&str; 12] = ["jan", "feb", "mar", "apr", "may", "jun", "jul", "aug", "sep", "oct", "nov", "dec"];

/// Three-letter lowercase month name for 1..=12.
pub fn month_abbrev(month: u32) -> &'static str {
    MONTH_ABBREV[(month as usize).clamp(1, 12) - 1]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodata::GridHeader;

    fn june(day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2010, 6, day).unwrap()
    }

    #[test]
    fn examples() {
        let flat: Vec<_> = (1..=30).map(|d| (june(d), 300.0)).collect();
        assert_eq!(monthly_mean(&flat, 6, 2010), Some(300.0));
        let ramp: Vec<_> = (1..=30).map(|d| (june(d), d as f64)).collect();
        assert_eq!(monthly_mean(&ramp, 6, 2010), Some(15.5));
        assert_eq!(monthly_mean(&ramp, 7, 2010), None);
        assert_eq!(monthly_mean(&ramp, 6, 2011), None);
    }

    #[test]
    fn grid_mean_skips_nodata() {
        let h = GridHeader::new(2, 1, 0.0, 0.0, 1.0, -1.0).unwrap();
        let days = vec![
            (june(1), RasterGrid::new(h, vec![1.0, -1.0]).unwrap()),
            (june(2), RasterGrid::new(h, vec![3.0, -1.0]).unwrap()),
            (NaiveDate::from_ymd_opt(2010, 7, 1).unwrap(), RasterGrid::new(h, vec![100.0, 100.0]).unwrap()),
        ];
        let g = monthly_mean_grid(&days, 6, 2010).unwrap();
        assert_eq!(g.values, vec![2.0, -1.0]);
        assert!(monthly_mean_grid(&days, 8, 2010).is_none());
    }

    #[test]
    fn abbreviations() {
        assert_eq!(month_abbrev(5), "may");
        assert_eq!(month_abbrev(11), "nov");
    }
}
