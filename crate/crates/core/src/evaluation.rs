//! Regression metrics, residual diagnostics and per-region error tables.
//!
//! MAPE is a fraction (0.16 means 16%); region errors are in percent.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum EvalError {
    #[error("no observations")]
    Empty,
    #[error("length mismatch: {0} truths vs {1} predictions")]
    LengthMismatch(usize, usize),
    #[error("need at least {need} observations, got {got}")]
    TooFew { need: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n: usize,
    pub r2: f64,
    pub mae: f64,
    pub mse: f64,
    pub rmse: f64,
    /// `None` when some truth value is zero.
    pub mape: Option<f64>,
    /// `None` when some truth value is negative.
    pub rmsle: Option<f64>,
}

fn check(y_true: &[f64], y_pred: &[f64], need: usize) -> Result<(), EvalError> {
    if y_true.len() != y_pred.len() {
        return Err(EvalError::LengthMismatch(y_true.len(), y_pred.len()));
    }
    if y_true.is_empty() {
        return Err(EvalError::Empty);
    }
    if y_true.len() < need {
        return Err(EvalError::TooFew { need, got: y_true.len() });
    }
    Ok(())
}

/// R2 with a constant truth vector is 1 for a perfect fit and 0 otherwise.
pub fn r2_score(y_true: &[f64], y_pred: &[f64]) -> f64 {
    let n = y_true.len() as f64;
    let mean = y_true.iter().sum::<f64>() / n;
    let ss_tot: f64 = y_true.iter().map(|t| (t - mean) * (t - mean)).sum();
    let ss_res: f64 = y_true.iter().zip(y_pred).map(|(t, p)| (t - p) * (t - p)).sum();
    if ss_tot == 0.0 {
        if ss_res == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        1.0 - ss_res / ss_tot
    }
}

pub fn compute_metrics(y_true: &[f64], y_pred: &[f64]) -> Result<MetricsReport, EvalError> {
    check(y_true, y_pred, 1)?;
    let n = y_true.len();
    let nf = n as f64;
    let mae = y_true.iter().zip(y_pred).map(|(t, p)| (t - p).abs()).sum::<f64>() / nf;
    let mse = y_true.iter().zip(y_pred).map(|(t, p)| (t - p) * (t - p)).sum::<f64>() / nf;
    let mape = if y_true.iter().any(|&t| t == 0.0) {
        None
    } else {
        Some(y_true.iter().zip(y_pred).map(|(t, p)| ((t - p) / t).abs()).sum::<f64>() / nf)
    };
    let rmsle = if y_true.iter().any(|&t| t < 0.0) {
        None
    } else {
        let s: f64 = y_true
            .iter()
            .zip(y_pred)
            .map(|(t, p)| {
                let d = p.max(0.0).ln_1p() - t.ln_1p();
                d * d
            })
            .sum();
        Some((s / nf).sqrt())
    };
    Ok(MetricsReport { n, r2: r2_score(y_true, y_pred), mae, mse, rmse: mse.sqrt(), mape, rmsle })
}

/// Equal-width histogram over `[lo, hi]`; the last bin is closed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<usize>,
}

impl Histogram {
    /// `⌈√n⌉` bins, or a single bin when every value is equal.
    pub fn sqrt_rule(values: &[f64]) -> Self {
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if values.is_empty() || lo == hi {
            return Histogram { lo, hi, counts: vec![values.len()] };
        }
        let bins = (values.len() as f64).sqrt().ceil() as usize;
        let width = (hi - lo) / bins as f64;
        let mut counts = vec![0; bins];
        for v in values {
            let i = (((v - lo) / width).floor() as usize).min(bins - 1);
            counts[i] += 1;
        }
        Histogram { lo, hi, counts }
    }

    pub fn edges(&self) -> Vec<f64> {
        let bins = self.counts.len();
        (0..=bins).map(|i| if i == bins { self.hi } else { self.lo + (self.hi - self.lo) * i as f64 / bins as f64 }).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSummary {
    /// `y_true - y_pred`, in input order.
    pub residuals: Vec<f64>,
    pub histogram: Histogram,
    pub mean: f64,
    pub skewness: f64,
}

/// Adjusted Fisher-Pearson skewness; 0 for zero spread, the plain moment
/// ratio when `n < 3`.
pub fn skewness(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let m2 = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let m3 = values.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
    if m2 == 0.0 {
        return 0.0;
    }
    let g1 = m3 / m2.powf(1.5);
    if values.len() < 3 {
        g1
    } else {
        g1 * (n * (n - 1.0)).sqrt() / (n - 2.0)
    }
}

pub fn residual_summary(y_true: &[f64], y_pred: &[f64]) -> Result<ResidualSummary, EvalError> {
    check(y_true, y_pred, 2)?;
    let residuals: Vec<f64> = y_true.iter().zip(y_pred).map(|(t, p)| t - p).collect();
    let mean = residuals.iter().sum::<f64>() / residuals.len() as f64;
    Ok(ResidualSummary { histogram: Histogram::sqrt_rule(&residuals), mean, skewness: skewness(&residuals), residuals })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionRow {
    pub state: String,
    pub district: String,
    pub actual: f64,
    pub predicted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistrictError {
    pub state: String,
    pub district: String,
    /// Mean absolute percentage error over the district's rows, in percent.
    pub ape_pct: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateError {
    pub state: String,
    /// Unweighted mean of the state's district values, in percent.
    pub mean_ape_pct: f64,
    pub n_districts: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RegionErrorSummary {
    pub districts: Vec<DistrictError>,
    pub states: Vec<StateError>,
    /// Rows dropped for a non-positive actual value.
    pub excluded: usize,
}

/// Groups rows by district, then by state. Both lists are sorted by name.
pub fn region_error(rows: &[RegionRow]) -> RegionErrorSummary {
    let mut by_district: BTreeMap<(&str, &str), (f64, usize)> = BTreeMap::new();
    let mut excluded = 0;
    for r in rows {
        if !(r.actual > 0.0) {
            excluded += 1;
            continue;
        }
        let e = by_district.entry((&r.state, &r.district)).or_insert((0.0, 0));
        e.0 += 100.0 * (r.actual - r.predicted).abs() / r.actual;
        e.1 += 1;
    }
    let districts: Vec<DistrictError> = by_district
        .into_iter()
        .map(|((s, d), (sum, n))| DistrictError { state: s.into(), district: d.into(), ape_pct: sum / n as f64, n })
        .collect();
    let mut by_state: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for d in &districts {
        by_state.entry(&d.state).or_default().push(d.ape_pct);
    }
    let states = by_state
        .into_iter()
        .map(|(s, v)| StateError { state: s.into(), mean_ape_pct: v.iter().sum::<f64>() / v.len() as f64, n_districts: v.len() })
        .collect();
    RegionErrorSummary { districts, states, excluded }
}

impl RegionErrorSummary {
    pub fn districts_csv(&self) -> String {
        let mut out = String::from("state,district,ape_pct,n\n");
        for d in &self.districts {
            out.push_str(&format!("{},{},{},{}\n", csv_field(&d.state), csv_field(&d.district), d.ape_pct, d.n));
        }
        out
    }

    pub fn states_csv(&self) -> String {
        let mut out = String::from("state,mean_ape_pct,n_districts\n");
        for s in &self.states {
            out.push_str(&format!("{},{},{}\n", csv_field(&s.state), s.mean_ape_pct, s.n_districts));
        }
        out
    }
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub(crate) fn opt_num(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

impl MetricsReport {
    pub const CSV_HEADER: &'static str = "r2,mae,mse,rmse,mape,rmsle,n";

    pub fn csv_values(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.r2,
            self.mae,
            self.mse,
            self.rmse,
            opt_num(self.mape),
            opt_num(self.rmsle),
            self.n
        )
    }
}
