//! CSV traces, aggregates across repetitions and SVG line plots.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{EpisodeRecord, RunReport, SweepRow};
use crate::error::{Error, Result};

pub const TRACE_SCHEMA: &str = "oreps-trace/v1";
pub const AGGREGATE_SCHEMA: &str = "oreps-aggregate/v1";
pub const SWEEP_SCHEMA: &str = "oreps-sweep/v1";

const TRACE_COLUMNS: [&str; 19] = [
    "variant",
    "repetition",
    "episode",
    "learner_cost",
    "realized_cost",
    "comparator",
    "regret",
    "average_regret",
    "estimate_norm",
    "psi",
    "phase",
    "eta",
    "gamma",
    "predictor_error",
    "optimism_violation",
    "dual_iterations",
    "collapsed",
    "kernel_covered",
    "bound_dominates",
];

const AGGREGATE_COLUMNS: [&str; 11] = [
    "variant",
    "episode",
    "n",
    "regret_mean",
    "regret_var",
    "average_regret_mean",
    "average_regret_var",
    "predictor_error_mean",
    "predictor_error_var",
    "learner_cost_mean",
    "learner_cost_var",
];

/// Mean and variance of every tracked metric at one episode of one variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub variant: String,
    pub episode: u64,
    /// Repetitions that reached this episode.
    pub n: usize,
    pub regret_mean: f64,
    pub regret_var: f64,
    pub average_regret_mean: f64,
    pub average_regret_var: f64,
    pub predictor_error_mean: f64,
    pub predictor_error_var: f64,
    pub learner_cost_mean: f64,
    pub learner_cost_var: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputPaths {
    pub trace: PathBuf,
    pub aggregate: PathBuf,
    pub regret_plot: PathBuf,
    pub error_plot: PathBuf,
}

fn create(path: &Path, schema: &str) -> Result<fs::File> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let mut f = fs::File::create(path)?;
    writeln!(f, "# schema={schema}")?;
    Ok(f)
}

fn write_rows<T: Serialize>(path: &Path, schema: &str, columns: &[&str], rows: &[T]) -> Result<()> {
    let file = create(path, schema)?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    w.write_record(columns)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path, schema: &str) -> Result<Vec<T>> {
    let mut first = String::new();
    BufReader::new(fs::File::open(path)?).read_line(&mut first)?;
    let expected = format!("# schema={schema}");
    if first.trim_end() != expected {
        return Err(Error::Config(format!(
            "{}: expected header `{expected}`, found `{}`",
            path.display(),
            first.trim_end()
        )));
    }
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub fn write_trace(path: &Path, records: &[EpisodeRecord]) -> Result<()> {
    write_rows(path, TRACE_SCHEMA, &TRACE_COLUMNS, records)
}

pub fn read_trace(path: &Path) -> Result<Vec<EpisodeRecord>> {
    read_rows(path, TRACE_SCHEMA)
}

pub fn write_aggregate(path: &Path, rows: &[AggregateRow]) -> Result<()> {
    write_rows(path, AGGREGATE_SCHEMA, &AGGREGATE_COLUMNS, rows)
}

pub fn read_aggregate(path: &Path) -> Result<Vec<AggregateRow>> {
    read_rows(path, AGGREGATE_SCHEMA)
}

pub fn write_sweep(path: &Path, rows: &[SweepRow]) -> Result<()> {
    write_rows(
        path,
        SWEEP_SCHEMA,
        &["variant", "eta", "gamma", "mean_final_average_regret", "aborted_repetitions"],
        rows,
    )
}

/// Sample mean and unbiased variance (zero for a single value).
fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, ss / (n - 1.0))
}

/// Groups records by variant (in order of first appearance) and episode.
pub fn aggregate<'a>(records: impl IntoIterator<Item = &'a EpisodeRecord>) -> Vec<AggregateRow> {
    let mut groups: Vec<(String, BTreeMap<u64, Vec<&EpisodeRecord>>)> = Vec::new();
    for r in records {
        let i = match groups.iter().position(|(v, _)| *v == r.variant) {
            Some(i) => i,
            None => {
                groups.push((r.variant.clone(), BTreeMap::new()));
                groups.len() - 1
            }
        };
        groups[i].1.entry(r.episode).or_default().push(r);
    }
    let mut rows = Vec::new();
    for (variant, by_episode) in groups {
        for (episode, rs) in by_episode {
            let stat = |f: fn(&EpisodeRecord) -> f64| mean_var(&rs.iter().map(|r| f(r)).collect::<Vec<_>>());
            let (regret_mean, regret_var) = stat(|r| r.regret);
            let (average_regret_mean, average_regret_var) = stat(|r| r.average_regret);
            let (predictor_error_mean, predictor_error_var) = stat(|r| r.predictor_error);
            let (learner_cost_mean, learner_cost_var) = stat(|r| r.learner_cost);
            rows.push(AggregateRow {
                variant: variant.clone(),
                episode,
                n: rs.len(),
                regret_mean,
                regret_var,
                average_regret_mean,
                average_regret_var,
                predictor_error_mean,
                predictor_error_var,
                learner_cost_mean,
                learner_cost_var,
            });
        }
    }
    rows
}

const PLOT_W: f64 = 720.0;
const PLOT_H: f64 = 440.0;
const MARGIN: f64 = 60.0;
const MAX_POINTS: usize = 800;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Renders one polyline per series on shared linear axes.
pub fn render_plot(title: &str, x_label: &str, y_label: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let finite = series
        .iter()
        .flat_map(|(_, pts)| pts)
        .filter(|(x, y)| x.is_finite() && y.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in finite {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (PLOT_W - 2.0 * MARGIN);
    let sy = |y: f64| PLOT_H - MARGIN - (y - y0) / (y1 - y0) * (PLOT_H - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{PLOT_W}" height="{PLOT_H}" viewBox="0 0 {PLOT_W} {PLOT_H}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="16">{}</text>"#,
        PLOT_W / 2.0,
        escape(title)
    );
    let (left, right, top, bottom) = (MARGIN, PLOT_W - MARGIN, MARGIN, PLOT_H - MARGIN);
    let _ = writeln!(
        svg,
        r#"<g class="axes" stroke="black" fill="none"><line x1="{left}" y1="{bottom}" x2="{right}" y2="{bottom}"/><line x1="{left}" y1="{top}" x2="{left}" y2="{bottom}"/></g>"#
    );
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="11">{}</text>"#,
            sx(xv),
            bottom + 16.0,
            tick(xv)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-size="11">{}</text>"#,
            left - 6.0,
            sy(yv) + 4.0,
            tick(yv)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="13">{}</text>"#,
        PLOT_W / 2.0,
        PLOT_H - 14.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{}" text-anchor="middle" font-size="13" transform="rotate(-90 16 {})">{}</text>"#,
        PLOT_H / 2.0,
        PLOT_H / 2.0,
        escape(y_label)
    );
    for (i, (label, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let stride = pts.len().div_ceil(MAX_POINTS).max(1);
        let mut coords = String::new();
        for (j, &(x, y)) in pts.iter().enumerate() {
            if (j % stride == 0 || j + 1 == pts.len()) && x.is_finite() && y.is_finite() {
                let _ = write!(coords, "{:.2},{:.2} ", sx(x), sy(y));
            }
        }
        let _ = writeln!(
            svg,
            r#"<polyline class="series" data-label="{}" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            escape(label),
            coords.trim_end()
        );
        let ly = top + 16.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<g class="legend"><line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}" font-size="11">{}</text></g>"#,
            right - 150.0,
            right - 130.0,
            right - 125.0,
            ly + 4.0,
            escape(label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e5) {
        format!("{v:.1e}")
    } else {
        format!("{v:.3}")
    }
}

fn series_of(rows: &[AggregateRow], f: fn(&AggregateRow) -> f64) -> Vec<(String, Vec<(f64, f64)>)> {
    let mut out: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for r in rows {
        if out.last().map(|(v, _)| v != &r.variant).unwrap_or(true) {
            out.push((r.variant.clone(), Vec::new()));
        }
        out.last_mut().unwrap().1.push((r.episode as f64, f(r)));
    }
    out
}

/// Writes trace, aggregate and both plots for `records` into `dir`.
pub fn emit_records(records: &[EpisodeRecord], dir: &Path) -> Result<OutputPaths> {
    fs::create_dir_all(dir)?;
    let paths = OutputPaths {
        trace: dir.join("trace.csv"),
        aggregate: dir.join("aggregate.csv"),
        regret_plot: dir.join("regret.svg"),
        error_plot: dir.join("predictor_error.svg"),
    };
    write_trace(&paths.trace, records)?;
    write_summary(records, &paths)?;
    Ok(paths)
}

/// Aggregate CSV and plots from already collected records.
pub fn write_summary(records: &[EpisodeRecord], paths: &OutputPaths) -> Result<()> {
    let rows = aggregate(records);
    write_aggregate(&paths.aggregate, &rows)?;
    let regret = render_plot(
        "Average regret",
        "episode",
        "mean regret / t",
        &series_of(&rows, |r| r.average_regret_mean),
    );
    fs::write(&paths.regret_plot, regret)?;
    let error = render_plot(
        "Predictor error",
        "episode",
        "mean sum of (c - M)",
        &series_of(&rows, |r| r.predictor_error_mean),
    );
    fs::write(&paths.error_plot, error)?;
    Ok(())
}

pub fn emit_outputs(report: &RunReport, dir: &Path) -> Result<OutputPaths> {
    let records: Vec<EpisodeRecord> = report.records().cloned().collect();
    emit_records(&records, dir)
}
