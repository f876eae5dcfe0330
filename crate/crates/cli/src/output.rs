//! CSV, SVG, summary and run-record writers.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::experiments::{Cell, Chart, Outcome};

pub const SCHEMA: u32 = 1;
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// SHA-256 of the config text followed by the effective seed.
pub fn config_hash(text: &str, seed: u64) -> String {
    let mut h = Sha256::new();
    h.update(text.as_bytes());
    h.update(seed.to_le_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn csv(o: &Outcome) -> String {
    let mut s = format!("# schema={SCHEMA}\n{}\n", o.columns.join(","));
    for row in &o.rows {
        let cells: Vec<String> = row.iter().map(Cell::to_string).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

fn log_range(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values
        .filter(|v| v.is_finite() && *v > 0.0)
        .map(f64::log10)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(v), b.max(v))
        });
    if lo > hi {
        return None;
    }
    if hi - lo < 1e-9 {
        Some((lo - 0.5, hi + 0.5))
    } else {
        Some((lo, hi))
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Log-log polyline chart. Points with a nonpositive coordinate are dropped.
pub fn svg(c: &Chart) -> String {
    let points = || c.series.iter().flat_map(|s| s.points.iter());
    let xr = log_range(points().map(|p| p.0)).unwrap_or((0.0, 1.0));
    let yr = log_range(points().map(|p| p.1)).unwrap_or((0.0, 1.0));
    let (pw, ph) = (WIDTH - 2.0 * MARGIN, HEIGHT - 2.0 * MARGIN);
    let sx = |x: f64| MARGIN + (x.log10() - xr.0) / (xr.1 - xr.0) * pw;
    let sy = |y: f64| HEIGHT - MARGIN - (y.log10() - yr.0) / (yr.1 - yr.0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="30" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        escape(&c.title)
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{} (log)</text>"#,
        WIDTH / 2.0,
        HEIGHT - 15.0,
        escape(&c.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="15" y="{}" text-anchor="middle" transform="rotate(-90 15 {})">{} (log)</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(&c.y_label)
    );
    for (label, v, x, y, anchor) in [
        ("x", xr.0, MARGIN, HEIGHT - MARGIN + 16.0, "start"),
        ("x", xr.1, WIDTH - MARGIN, HEIGHT - MARGIN + 16.0, "end"),
        ("y", yr.0, MARGIN - 4.0, HEIGHT - MARGIN, "end"),
        ("y", yr.1, MARGIN - 4.0, MARGIN + 10.0, "end"),
    ] {
        let _ = label;
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{y}" text-anchor="{anchor}">1e{v:.1}</text>"#
        );
    }
    for (i, series) in c.series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = series
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite() && *x > 0.0 && *y > 0.0)
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        if !pts.is_empty() {
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                pts.join(" ")
            );
        }
        let ly = MARGIN + 16.0 * (i as f64 + 1.0);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{ly}" fill="{color}">{}</text>"#,
            MARGIN + 8.0,
            escape(&series.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

#[derive(Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub measured: f64,
    pub threshold: String,
    pub status: &'static str,
}

#[derive(Serialize)]
pub struct RunRecord {
    pub schema: u32,
    pub tool_version: String,
    pub config_sha256: String,
    pub seed: u64,
    pub model: String,
    pub experiment: String,
    pub wall_time_s: f64,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub checks: Vec<CheckRecord>,
}

impl RunRecord {
    pub fn new(
        o: &Outcome,
        model: &str,
        experiment: &str,
        hash: String,
        seed: u64,
        wall: f64,
    ) -> Self {
        RunRecord {
            schema: SCHEMA,
            tool_version: VERSION.to_string(),
            config_sha256: hash,
            seed,
            model: model.to_string(),
            experiment: experiment.to_string(),
            wall_time_s: wall,
            columns: o.columns.iter().map(|c| c.to_string()).collect(),
            rows: o
                .rows
                .iter()
                .map(|r| r.iter().map(Cell::to_string).collect())
                .collect(),
            checks: o
                .checks
                .iter()
                .map(|c| CheckRecord {
                    name: c.name.clone(),
                    measured: c.measured,
                    threshold: c.threshold.clone(),
                    status: status(c.pass),
                })
                .collect(),
        }
    }
}

pub fn status(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FLAG"
    }
}

pub fn summary(r: &RunRecord) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "bernstein-lab {}", r.tool_version);
    let _ = writeln!(s, "model: {}", r.model);
    let _ = writeln!(s, "experiment: {}", r.experiment);
    let _ = writeln!(s, "config sha256: {}", r.config_sha256);
    let _ = writeln!(s, "seed: {}", r.seed);
    let _ = writeln!(s, "rows: {}", r.rows.len());
    let _ = writeln!(s, "wall time: {:.3} s", r.wall_time_s);
    for c in &r.checks {
        let _ = writeln!(
            s,
            "{} {}: {:e} ({})",
            c.status, c.name, c.measured, c.threshold
        );
    }
    s
}

pub struct Written {
    pub csv: PathBuf,
    pub files: Vec<PathBuf>,
}

pub fn write_all(
    dir: &Path,
    name: &str,
    o: &Outcome,
    record: &RunRecord,
    with_svg: bool,
) -> std::io::Result<Written> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    let mut put = |ext: &str, body: String| -> std::io::Result<PathBuf> {
        let path = dir.join(format!("{name}.{ext}"));
        fs::write(&path, body)?;
        files.push(path.clone());
        Ok(path)
    };
    let csv_path = put("csv", csv(o))?;
    if with_svg {
        put("svg", svg(&o.chart))?;
    }
    put("summary.txt", summary(record))?;
    let toml = toml::to_string(record).map_err(std::io::Error::other)?;
    put("record.toml", toml)?;
    Ok(Written {
        csv: csv_path,
        files,
    })
}
