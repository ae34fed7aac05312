use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::DatasetError;

/// One district-season yield observation. `year` is the harvest year.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct YieldRecord {
    pub state: String,
    pub district: String,
    pub season: String,
    pub year: i32,
    /// Hectares.
    pub area: f64,
    /// Tonnes.
    pub production: f64,
    /// Tonnes per hectare.
    pub yield_t_ha: f64,
}

/// Header names for the yield table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct YieldColumns {
    pub state: String,
    pub district: String,
    pub crop: String,
    pub season: String,
    pub year: String,
    pub area: String,
    pub production: String,
    #[serde(rename = "yield")]
    pub yield_col: String,
}

impl Default for YieldColumns {
    fn default() -> Self {
        Self {
            state: "State".into(),
            district: "District".into(),
            crop: "Crop".into(),
            season: "Season".into(),
            year: "Year".into(),
            area: "Area".into(),
            production: "Production".into(),
            yield_col: "Yield".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct YieldFilter {
    /// Compared after trimming and lowercasing.
    pub season: String,
    /// Optional crop label, compared the same way.
    pub crop: Option<String>,
    pub min_year: i32,
    pub max_year: i32,
}

impl Default for YieldFilter {
    fn default() -> Self {
        Self { season: "kharif".into(), crop: None, min_year: 1995, max_year: 2021 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedYields {
    pub records: Vec<YieldRecord>,
    /// Rows with unparsable or out-of-range values.
    pub skipped: usize,
    /// Well-formed rows of another season or crop.
    pub filtered: usize,
}

pub fn normalize_season(s: &str) -> String {
    s.trim().to_lowercase()
}

pub fn parse_yield_csv(text: &str, columns: &YieldColumns, filter: &YieldFilter) -> Result<ParsedYields, DatasetError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(true).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| DatasetError::Csv(e.to_string()))?.clone();
    let find = |name: &str| -> Result<usize, DatasetError> {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| DatasetError::MissingColumn(name.to_owned()))
    };
    let idx_state = find(&columns.state)?;
    let idx_district = find(&columns.district)?;
    let idx_season = find(&columns.season)?;
    let idx_year = find(&columns.year)?;
    let idx_area = find(&columns.area)?;
    let idx_production = find(&columns.production)?;
    let idx_yield = find(&columns.yield_col)?;
    let idx_crop = match &filter.crop {
        Some(_) => Some(find(&columns.crop)?),
        None => None,
    };
    let season = normalize_season(&filter.season);
    let crop = filter.crop.as_deref().map(normalize_season);

    let mut records = Vec::new();
    let mut skipped = 0;
    let mut filtered = 0;
    for row in reader.records() {
        let Ok(row) = row else {
            skipped += 1;
            continue;
        };
        let text_at = |i: usize| row.get(i).unwrap_or("").to_owned();
        let num = |i: usize| row.get(i).and_then(|s| s.parse::<f64>().ok()).filter(|v| v.is_finite());

        let row_season = normalize_season(&text_at(idx_season));
        let row_crop = idx_crop.map(|i| normalize_season(&text_at(i)));
        let state = text_at(idx_state);
        let district = text_at(idx_district);
        let year = row.get(idx_year).and_then(|s| s.parse::<i32>().ok());
        let (Some(year), Some(area), Some(production), Some(yield_t_ha)) =
            (year, num(idx_area), num(idx_production), num(idx_yield))
        else {
            skipped += 1;
            continue;
        };
        if state.is_empty() || district.is_empty() || area <= 0.0 || yield_t_ha <= 0.0 {
            skipped += 1;
            continue;
        }
        if year < filter.min_year || year > filter.max_year {
            skipped += 1;
            continue;
        }
        if row_season != season || (crop.is_some() && row_crop != crop) {
            filtered += 1;
            continue;
        }
        records.push(YieldRecord { state, district, season: row_season, year, area, production, yield_t_ha });
    }
    if records.is_empty() {
        return Err(DatasetError::NoRecords);
    }
    Ok(ParsedYields { records, skipped, filtered })
}

/// Whether the mean and standard deviation are taken over all records or per district.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutlierScope {
    #[default]
    Global,
    District,
}

/// Drops records with `|yield - mean| > k * sd` (population sd, computed
/// once over the input). `k = f64::INFINITY` disables the filter.
/// Returns the kept records and the number removed.
pub fn remove_yield_outliers(records: &[YieldRecord], k: f64, scope: OutlierScope) -> (Vec<YieldRecord>, usize) {
    if records.len() < 2 || k.is_infinite() {
        return (records.to_vec(), 0);
    }
    let mut groups: HashMap<(&str, &str), Vec<usize>> = HashMap::new();
    for (i, r) in records.iter().enumerate() {
        let key = match scope {
            OutlierScope::Global => ("", ""),
            OutlierScope::District => (r.state.as_str(), r.district.as_str()),
        };
        groups.entry(key).or_default().push(i);
    }
    let mut keep = vec![true; records.len()];
    for members in groups.values() {
        let n = members.len() as f64;
        let mean = members.iter().map(|&i| records[i].yield_t_ha).sum::<f64>() / n;
        let var = members.iter().map(|&i| (records[i].yield_t_ha - mean).powi(2)).sum::<f64>() / n;
        let limit = k * var.sqrt();
        for &i in members {
            if (records[i].yield_t_ha - mean).abs() > limit {
                keep[i] = false;
            }
        }
    }
    let kept: Vec<YieldRecord> = records.iter().zip(&keep).filter(|(_, k)| **k).map(|(r, _)| r.clone()).collect();
    let removed = records.len() - kept.len();
    (kept, removed)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "State,District,Crop,Season,Year,Area,Production,Yield\n";

    fn record(y: f64) -> YieldRecord {
        YieldRecord {
            state: "S".into(),
            district: "D".into(),
            season: "kharif".into(),
            year: 2010,
            area: 1.0,
            production: y,
            yield_t_ha: y,
        }
    }

    #[test]
    fn parses_one_row() {
        let text = format!("{HEADER}Gujarat,Kheda,Rice,Kharif     ,2015,1000,2500,2.5\n");
        let p = parse_yield_csv(&text, &YieldColumns::default(), &YieldFilter::default()).unwrap();
        assert_eq!(p.records.len(), 1);
        assert_eq!(p.records[0].season, "kharif");
        assert_eq!(p.records[0].yield_t_ha, 2.5);
    }

    #[test]
    fn skips_na_and_filters_seasons() {
        let text = format!(
            "{HEADER}G,A,Rice,Kharif,2015,1000,2500,2.5\nG,B,Rice,Kharif,2015,1000,NA,NA\nG,C,Rice,Rabi,2015,10,20,2\nG,D,Rice,kharif,2016,10,20,2\nG,E,Rice,Kharif,1990,10,20,2\n"
        );
        let p = parse_yield_csv(&text, &YieldColumns::default(), &YieldFilter::default()).unwrap();
        assert_eq!(p.records.len(), 2);
        assert_eq!(p.skipped, 2);
        assert_eq!(p.filtered, 1);
    }

    #[test]
    fn column_errors() {
        let text = "State,District,Season,Year,Area,Production\nG,A,Kharif,2015,1,1\n";
        assert!(matches!(
            parse_yield_csv(text, &YieldColumns::default(), &YieldFilter::default()),
            Err(DatasetError::MissingColumn(c)) if c == "Yield"
        ));
        let text = format!("{HEADER}G,A,Rice,Rabi,2015,1,1,1\n");
        assert!(matches!(
            parse_yield_csv(&text, &YieldColumns::default(), &YieldFilter::default()),
            Err(DatasetError::NoRecords)
        ));
    }

    #[test]
    fn custom_header_map() {
        let cols = YieldColumns { district: "dist_name".into(), yield_col: "yld".into(), ..Default::default() };
        let text = "State,dist_name,Crop,Season,Year,Area,Production,yld\nG,A,Rice,Kharif,2015,1,1,1\n";
        assert_eq!(parse_yield_csv(text, &cols, &YieldFilter::default()).unwrap().records.len(), 1);
    }

    #[test]
    fn outlier_examples() {
        let mut records: Vec<YieldRecord> = (0..100).map(|_| record(2.0)).collect();
        records.push(record(50.0));
        let (kept, removed) = remove_yield_outliers(&records, 3.0, OutlierScope::Global);
        assert_eq!(removed, 1);
        assert!(kept.iter().all(|r| r.yield_t_ha == 2.0));

        let same: Vec<YieldRecord> = (0..10).map(|_| record(3.0)).collect();
        assert_eq!(remove_yield_outliers(&same, 3.0, OutlierScope::Global).1, 0);
        assert_eq!(remove_yield_outliers(&records, f64::INFINITY, OutlierScope::Global).0, records);
    }

    #[test]
    fn district_scope_uses_group_statistics() {
        let mut records: Vec<YieldRecord> = (0..20).map(|_| record(2.0)).collect();
        let mut high: Vec<YieldRecord> = (0..20)
            .map(|_| YieldRecord { district: "E".into(), ..record(9.0) })
            .collect();
        records.append(&mut high);
        let (_, removed) = remove_yield_outliers(&records, 0.5, OutlierScope::District);
        assert_eq!(removed, 0);
        let (_, removed) = remove_yield_outliers(&records, 0.5, OutlierScope::Global);
        assert_eq!(removed, 40);
    }
}
