//! SVG figures from run artifacts.
//!
//! - `rate_trace`: per-link rate against time from a V2X or power trace.
//! - `learning_curve`: one metric from `metrics.csv`, one series per
//!   replica plus their mean.
//! - `cdf`: empirical distribution of delivery slots from
//!   `delivery_times.csv`, one series per input file. Undelivered payloads
//!   count in the denominator, so each curve ends at the delivery rate.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use plotters::prelude::*;

use crate::metrics::read_metrics;
use crate::{write_file, HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    RateTrace,
    LearningCurve,
    Cdf,
}

impl std::str::FromStr for PlotKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rate_trace" => Ok(PlotKind::RateTrace),
            "learning_curve" => Ok(PlotKind::LearningCurve),
            "cdf" => Ok(PlotKind::Cdf),
            _ => Err(HarnessError::Invalid(format!(
                "unknown plot kind {s:?} (rate_trace, learning_curve, cdf)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

struct Table<'a> {
    header: Vec<&'a str>,
    rows: Vec<Vec<&'a str>>,
}

impl<'a> Table<'a> {
    fn parse(text: &'a str) -> Self {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().map(|h| h.split(',').map(str::trim).collect()).unwrap_or_default();
        let rows = lines.map(|l| l.split(',').map(str::trim).collect()).collect();
        Self { header, rows }
    }

    fn col(&self, names: &[&str]) -> Result<usize> {
        names
            .iter()
            .find_map(|n| self.header.iter().position(|h| h == n))
            .ok_or_else(|| HarnessError::Invalid(format!("trace has none of the columns {names:?}")))
    }

    fn num(row: &[&str], i: usize) -> Result<f64> {
        row.get(i)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| HarnessError::Invalid(format!("bad value in column {i}: {row:?}")))
    }
}

/// Series per link; V2X rates are converted to Mb/s.
pub fn rate_trace_series(csv: &str) -> Result<Vec<Series>> {
    let t = Table::parse(csv);
    if t.rows.is_empty() {
        return Ok(Vec::new());
    }
    let slot = t.col(&["slot"])?;
    let link = t.col(&["link_id", "link"])?;
    let v2x = t.header.contains(&"v2v_rate");
    let rate = t.col(&["v2v_rate", "rate"])?;
    let scale = if v2x { 1e-6 } else { 1.0 };
    let mut by_link: BTreeMap<u64, Vec<(f64, f64)>> = BTreeMap::new();
    for row in &t.rows {
        let k = Table::num(row, link)? as u64;
        by_link
            .entry(k)
            .or_default()
            .push((Table::num(row, slot)?, Table::num(row, rate)? * scale));
    }
    let name = if v2x { "V2V link" } else { "link" };
    Ok(by_link
        .into_iter()
        .map(|(k, mut points)| {
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            Series {
                label: format!("{name} {k}"),
                points,
            }
        })
        .collect())
}

/// One series per replica, sorted by step, then the mean over the steps
/// every replica logged.
pub fn learning_curve_series(metrics_csv: &str, metric: &str) -> Result<Vec<Series>> {
    let rows = read_metrics(metrics_csv)?;
    let mut by_replica: BTreeMap<usize, BTreeMap<u64, f64>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.metric == metric) {
        by_replica.entry(r.replica).or_default().insert(r.step, r.value);
    }
    if by_replica.is_empty() {
        return Ok(Vec::new());
    }
    let mut series: Vec<Series> = by_replica
        .iter()
        .map(|(r, pts)| Series {
            label: format!("replica {r}"),
            points: pts.iter().map(|(&s, &v)| (s as f64, v)).collect(),
        })
        .collect();
    let n = by_replica.len();
    let mut sums: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
    for pts in by_replica.values() {
        for (&s, &v) in pts {
            let e = sums.entry(s).or_default();
            e.0 += v;
            e.1 += 1;
        }
    }
    series.push(Series {
        label: "mean".into(),
        points: sums
            .into_iter()
            .filter(|(_, (_, c))| *c == n)
            .map(|(s, (total, _))| (s as f64, total / n as f64))
            .collect(),
    });
    Ok(series)
}

/// `(slot, fraction of payloads delivered by the end of that slot)`.
pub fn delivery_cdf(csv: &str) -> Result<Vec<(f64, f64)>> {
    let t = Table::parse(csv);
    if t.rows.is_empty() {
        return Ok(Vec::new());
    }
    let col = t.col(&["delivery_slot"])?;
    let mut slots = Vec::new();
    for row in &t.rows {
        match row.get(col).copied().unwrap_or("") {
            "" => {}
            s => slots.push(
                s.parse::<usize>()
                    .map_err(|_| HarnessError::Invalid(format!("bad delivery slot {s:?}")))?,
            ),
        }
    }
    let total = t.rows.len() as f64;
    let last = slots.iter().copied().max().unwrap_or(0);
    let mut counts = vec![0usize; last + 1];
    for s in slots {
        counts[s] += 1;
    }
    let mut acc = 0;
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(t, c)| {
            acc += c;
            (t as f64, acc as f64 / total)
        })
        .collect())
}

fn bounds(series: &[Series]) -> ((f64, f64), (f64, f64)) {
    let pts = series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let pad = |a: f64, b: f64| {
        if b > a {
            (a, b + (b - a) * 0.02)
        } else {
            (a - 1.0, b + 1.0)
        }
    };
    (pad(x0, x1), pad(y0, y1))
}

/// Render line series into a standalone SVG document.
pub fn render_svg(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> Result<String> {
    let draw = |e: &dyn std::fmt::Display| HarnessError::Invalid(format!("plot: {e}"));
    let ((x0, x1), (y0, y1)) = bounds(series);
    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, (800, 500)).into_drawing_area();
        root.fill(&WHITE).map_err(|e| draw(&e))?;
        let mut chart = ChartBuilder::on(&root)
            .caption(title, ("sans-serif", 20))
            .margin(10)
            .x_label_area_size(40)
            .y_label_area_size(60)
            .build_cartesian_2d(x0..x1, y0..y1)
            .map_err(|e| draw(&e))?;
        chart
            .configure_mesh()
            .x_desc(x_label)
            .y_desc(y_label)
            .draw()
            .map_err(|e| draw(&e))?;
        for (i, s) in series.iter().enumerate() {
            let style = if s.label == "mean" {
                BLACK.stroke_width(2)
            } else {
                Palette99::pick(i).stroke_width(1)
            };
            chart
                .draw_series(LineSeries::new(s.points.iter().copied(), style))
                .map_err(|e| draw(&e))?
                .label(s.label.as_str())
                .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], style));
        }
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .draw()
            .map_err(|e| draw(&e))?;
        root.present().map_err(|e| draw(&e))?;
    }
    Ok(svg)
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))
}

/// Build a figure from `inputs` and write it to `out`. Returns `None` and
/// logs a warning, writing nothing, when the inputs hold no data.
/// `metric` selects the learning-curve metric (default `train/reward`).
pub fn emit_plot(kind: PlotKind, inputs: &[PathBuf], out: &Path, metric: Option<&str>) -> Result<Option<PathBuf>> {
    let (series, title, x, y) = match kind {
        PlotKind::RateTrace => {
            let mut s = Vec::new();
            for p in inputs {
                s.extend(rate_trace_series(&read(p)?)?);
            }
            let v2x = s.first().is_some_and(|x| x.label.starts_with("V2V"));
            let (x, y) = if v2x { ("time (ms)", "rate (Mb/s)") } else { ("slot", "rate (bit/s/Hz)") };
            (s, "Per-link rate", x, y)
        }
        PlotKind::LearningCurve => {
            let m = metric.unwrap_or("train/reward");
            let mut s = Vec::new();
            for p in inputs {
                s.extend(learning_curve_series(&read(p)?, m)?);
            }
            (s, "Learning curve", "step", m)
        }
        PlotKind::Cdf => {
            let mut s = Vec::new();
            for p in inputs {
                let points = delivery_cdf(&read(p)?)?;
                if !points.is_empty() {
                    let label = p.file_stem().map_or("delivery".into(), |f| f.to_string_lossy().into_owned());
                    s.push(Series { label, points });
                }
            }
            (s, "Delivery time CDF", "slot", "fraction delivered")
        }
    };
    if series.iter().all(|s| s.points.is_empty()) {
        log::warn!("no data to plot in {inputs:?}; nothing written");
        return Ok(None);
    }
    write_file(out, render_svg(title, x, y, &series)?)?;
    Ok(Some(out.to_path_buf()))
}
