//! SVG figures for a finished run.
//!
//! Each figure is built in two steps: a plain data series is extracted from
//! the run's CSV outputs, then rendered. The series are public so their
//! contents can be checked without parsing SVG.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use plotters::prelude::*;
use serde::Deserialize;

use crate::evaluation::Histogram;

const SIZE: (u32, u32) = (720, 540);

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterSeries {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub points: Vec<(f64, f64)>,
    /// Optional per-point value mapped to colour.
    pub color: Option<Vec<f64>>,
    /// Draw the `y = x` line.
    pub identity: bool,
    /// Draw a horizontal line at `y = 0`.
    pub zero_line: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistogramSeries {
    pub title: String,
    pub x_label: String,
    pub histogram: Histogram,
}

/// One horizontal strip per feature, most important on top.
#[derive(Debug, Clone, PartialEq)]
pub struct SummarySeries {
    pub features: Vec<String>,
    /// `(phi, feature_value)` per explained row, aligned with `features`.
    pub strips: Vec<Vec<(f64, f64)>>,
}

#[derive(Deserialize)]
struct ResidualRow {
    actual: f64,
    predicted: f64,
    residual: f64,
}

#[derive(Deserialize)]
struct SummaryRow {
    feature: String,
    feature_value: f64,
    phi: f64,
}

#[derive(Deserialize)]
struct DependenceRow {
    feature_value: f64,
    phi: f64,
    color_value: f64,
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, String> {
    csv::Reader::from_path(path)
        .map_err(|e| format!("{}: {e}", path.display()))?
        .deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| format!("{}: {e}", path.display()))
}

pub fn prediction_error_series(actual: &[f64], predicted: &[f64]) -> ScatterSeries {
    ScatterSeries {
        title: "Prediction error".into(),
        x_label: "actual yield".into(),
        y_label: "predicted yield".into(),
        points: actual.iter().copied().zip(predicted.iter().copied()).collect(),
        color: None,
        identity: true,
        zero_line: false,
    }
}

pub fn residual_series(predicted: &[f64], residual: &[f64]) -> ScatterSeries {
    ScatterSeries {
        title: "Residuals".into(),
        x_label: "predicted yield".into(),
        y_label: "actual - predicted".into(),
        points: predicted.iter().copied().zip(residual.iter().copied()).collect(),
        color: None,
        identity: false,
        zero_line: true,
    }
}

pub fn residual_histogram_series(residual: &[f64]) -> HistogramSeries {
    HistogramSeries { title: "Residual distribution".into(), x_label: "actual - predicted".into(), histogram: Histogram::sqrt_rule(residual) }
}

/// Rows are `(feature_value, phi, color_value)` in file order.
pub fn dependence_series(feature: &str, color: &str, rows: &[[f64; 3]]) -> ScatterSeries {
    ScatterSeries {
        title: format!("SHAP dependence: {feature} (colour: {color})"),
        x_label: feature.into(),
        y_label: format!("SHAP value for {feature}"),
        points: rows.iter().map(|r| (r[0], r[1])).collect(),
        color: Some(rows.iter().map(|r| r[2]).collect()),
        identity: false,
        zero_line: true,
    }
}

/// `rows` are `(feature, feature_value, phi)`; keeps the `top` features by
/// mean |phi|, ties in first-seen order.
pub fn summary_series(rows: &[(String, f64, f64)], top: usize) -> SummarySeries {
    let mut order: Vec<String> = Vec::new();
    let mut strips: BTreeMap<&str, Vec<(f64, f64)>> = BTreeMap::new();
    for (f, v, p) in rows {
        if !strips.contains_key(f.as_str()) {
            order.push(f.clone());
        }
        strips.entry(f.as_str()).or_default().push((*p, *v));
    }
    let mean_abs = |f: &str| {
        let s = &strips[f];
        s.iter().map(|(p, _)| p.abs()).sum::<f64>() / s.len() as f64
    };
    let mut ranked: Vec<(usize, f64)> = order.iter().enumerate().map(|(i, f)| (i, mean_abs(f))).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    ranked.truncate(top);
    SummarySeries {
        features: ranked.iter().map(|&(i, _)| order[i].clone()).collect(),
        strips: ranked.iter().map(|&(i, _)| strips[order[i].as_str()].clone()).collect(),
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        return (0.0, 1.0);
    }
    let pad = if hi > lo { 0.05 * (hi - lo) } else { 0.5 };
    (lo - pad, hi + pad)
}

fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    padded(lo, hi)
}

/// Blue-to-red ramp over `[0, 1]`.
fn ramp(t: f64) -> RGBColor {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.5 };
    RGBColor((30.0 + 210.0 * t) as u8, (80.0 + 40.0 * (1.0 - (2.0 * t - 1.0).abs())) as u8, (230.0 - 200.0 * t) as u8)
}

fn normalizer(values: &[f64]) -> impl Fn(f64) -> f64 {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    move |v| if hi > lo { (v - lo) / (hi - lo) } else { 0.5 }
}

type DrawResult<T> = Result<T, String>;

fn err<E: std::fmt::Debug>(e: E) -> String {
    format!("plot: {e:?}")
}

pub fn render_scatter(s: &ScatterSeries) -> DrawResult<String> {
    let mut buf = String::new();
    {
        let root = SVGBackend::with_string(&mut buf, SIZE).into_drawing_area();
        root.fill(&WHITE).map_err(err)?;
        let (mut x0, mut x1) = extent(s.points.iter().map(|p| p.0));
        let (mut y0, mut y1) = extent(s.points.iter().map(|p| p.1));
        if s.identity {
            let (lo, hi) = (x0.min(y0), x1.max(y1));
            (x0, x1, y0, y1) = (lo, hi, lo, hi);
        }
        let mut chart = ChartBuilder::on(&root)
            .caption(&s.title, ("sans-serif", 20))
            .margin(12)
            .x_label_area_size(40)
            .y_label_area_size(56)
            .build_cartesian_2d(x0..x1, y0..y1)
            .map_err(err)?;
        chart.configure_mesh().x_desc(&s.x_label).y_desc(&s.y_label).draw().map_err(err)?;
        if s.identity {
            chart.draw_series(LineSeries::new([(x0, x0), (x1, x1)], RED.stroke_width(1))).map_err(err)?;
        }
        if s.zero_line {
            chart.draw_series(LineSeries::new([(x0, 0.0), (x1, 0.0)], BLACK.mix(0.5))).map_err(err)?;
        }
        match &s.color {
            Some(c) => {
                let norm = normalizer(c);
                chart
                    .draw_series(s.points.iter().zip(c).map(|(&p, &v)| Circle::new(p, 3, ramp(norm(v)).mix(0.8).filled())))
                    .map_err(err)?;
            }
            None => {
                chart.draw_series(s.points.iter().map(|&p| Circle::new(p, 3, BLUE.mix(0.6).filled()))).map_err(err)?;
            }
        }
        root.present().map_err(err)?;
    }
    Ok(buf)
}

pub fn render_histogram(s: &HistogramSeries) -> DrawResult<String> {
    let mut buf = String::new();
    {
        let root = SVGBackend::with_string(&mut buf, SIZE).into_drawing_area();
        root.fill(&WHITE).map_err(err)?;
        let edges = s.histogram.edges();
        let (x0, x1) = padded(edges[0], edges[edges.len() - 1]);
        let ymax = s.histogram.counts.iter().copied().max().unwrap_or(1).max(1) as f64 * 1.1;
        let mut chart = ChartBuilder::on(&root)
            .caption(&s.title, ("sans-serif", 20))
            .margin(12)
            .x_label_area_size(40)
            .y_label_area_size(56)
            .build_cartesian_2d(x0..x1, 0.0..ymax)
            .map_err(err)?;
        chart.configure_mesh().x_desc(&s.x_label).y_desc("count").draw().map_err(err)?;
        let single = s.histogram.counts.len() == 1 && edges[0] == edges[1];
        chart
            .draw_series(s.histogram.counts.iter().enumerate().map(|(i, &c)| {
                let (a, b) = if single { (x0 + 0.25 * (x1 - x0), x1 - 0.25 * (x1 - x0)) } else { (edges[i], edges[i + 1]) };
                Rectangle::new([(a, 0.0), (b, c as f64)], BLUE.mix(0.6).filled())
            }))
            .map_err(err)?;
        root.present().map_err(err)?;
    }
    Ok(buf)
}

/// Strip plot of attributions: one row per feature, points jittered
/// vertically and coloured by the normalised feature value.
pub fn render_summary(s: &SummarySeries) -> DrawResult<String> {
    let mut buf = String::new();
    {
        let height = (80 + 28 * s.features.len() as u32).max(240);
        let root = SVGBackend::with_string(&mut buf, (SIZE.0, height)).into_drawing_area();
        root.fill(&WHITE).map_err(err)?;
        let (x0, x1) = extent(s.strips.iter().flatten().map(|p| p.0));
        let n = s.features.len().max(1) as f64;
        let labels = s.features.clone();
        let mut chart = ChartBuilder::on(&root)
            .caption("SHAP summary", ("sans-serif", 20))
            .margin(12)
            .x_label_area_size(40)
            .y_label_area_size(110)
            .build_cartesian_2d(x0..x1, -0.5..(n - 0.5))
            .map_err(err)?;
        chart
            .configure_mesh()
            .x_desc("SHAP value")
            .y_labels(s.features.len().max(1))
            .y_label_formatter(&|y| {
                let i = y.round();
                let k = (n - 1.0 - i) as isize;
                if (y - i).abs() < 1e-6 && k >= 0 && (k as usize) < labels.len() { labels[k as usize].clone() } else { String::new() }
            })
            .draw()
            .map_err(err)?;
        for (k, strip) in s.strips.iter().enumerate() {
            let y = n - 1.0 - k as f64;
            let values: Vec<f64> = strip.iter().map(|p| p.1).collect();
            let norm = normalizer(&values);
            let m = strip.len().max(1) as f64;
            chart
                .draw_series(strip.iter().enumerate().map(|(i, &(phi, v))| {
                    // Deterministic jitter spread over the strip height.
                    let jitter = ((i as f64 * 0.618_034) % 1.0 - 0.5) * 0.6 * (m / (m + 4.0));
                    Circle::new((phi, y + jitter), 2, ramp(norm(v)).mix(0.8).filled())
                }))
                .map_err(err)?;
        }
        chart.draw_series(LineSeries::new([(0.0, -0.5), (0.0, n - 0.5)], BLACK.mix(0.4))).map_err(err)?;
        root.present().map_err(err)?;
    }
    Ok(buf)
}

/// Writes the figures for one experiment directory of a run into `out`.
/// SHAP figures are produced when the SHAP tables exist; `dependence` names
/// the plotted and colouring features of the dependence table.
pub fn cmd_plot(experiment_dir: &Path, out: &Path, dependence: (&str, &str)) -> Result<Vec<PathBuf>, String> {
    fs::create_dir_all(out).map_err(|e| format!("{}: {e}", out.display()))?;
    let mut written = Vec::new();
    let mut save = |name: &str, svg: String| -> Result<(), String> {
        let path = out.join(name);
        fs::write(&path, svg).map_err(|e| format!("{}: {e}", path.display()))?;
        written.push(path);
        Ok(())
    };
    let res: Vec<ResidualRow> = read_rows(&experiment_dir.join("residuals.csv"))?;
    let actual: Vec<f64> = res.iter().map(|r| r.actual).collect();
    let predicted: Vec<f64> = res.iter().map(|r| r.predicted).collect();
    let residual: Vec<f64> = res.iter().map(|r| r.residual).collect();
    save("prediction_error.svg", render_scatter(&prediction_error_series(&actual, &predicted))?)?;
    save("residuals.svg", render_scatter(&residual_series(&predicted, &residual))?)?;
    save("residual_histogram.svg", render_histogram(&residual_histogram_series(&residual))?)?;

    let summary = experiment_dir.join("shap_summary.csv");
    if summary.is_file() {
        let rows: Vec<(String, f64, f64)> =
            read_rows::<SummaryRow>(&summary)?.into_iter().map(|r| (r.feature, r.feature_value, r.phi)).collect();
        save("shap_summary.svg", render_summary(&summary_series(&rows, 20))?)?;
    }
    let dep = experiment_dir.join("shap_dependence.csv");
    if dep.is_file() {
        let rows: Vec<[f64; 3]> = read_rows::<DependenceRow>(&dep)?.into_iter().map(|r| [r.feature_value, r.phi, r.color_value]).collect();
        save("shap_dependence.svg", render_scatter(&dependence_series(dependence.0, dependence.1, &rows))?)?;
    }
    Ok(written)
}
