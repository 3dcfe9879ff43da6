//! Trace CSVs, manifests and `key: value` reports.

use std::fmt::Display;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use crate::matlin::Mat;
use crate::solvers::IterationTrace;

pub const TRACE_HEADER: [&str; 8] = [
    "iter",
    "frob_error",
    "peps_error",
    "dare_residual",
    "closed_loop_stable",
    "a_i",
    "b_i",
    "term_reason",
];

/// 17 significant digits, enough to round-trip an `f64`.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

/// One row per record plus a trailing row holding only the termination
/// reason. `offsets` carries `(a_i, b_i)` for inexact runs.
pub fn write_trace_csv<W: Write>(
    w: W,
    trace: &IterationTrace,
    offsets: Option<(&[f64], &[f64])>,
) -> io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(TRACE_HEADER)?;
    for (i, r) in trace.records.iter().enumerate() {
        let (a, b) = match offsets {
            Some((a, b)) => (a.get(i).copied(), b.get(i).copied()),
            None => (None, None),
        };
        out.write_record([
            r.index.to_string(),
            opt(r.frob_error),
            opt(r.peps_error),
            opt(r.dare_residual),
            r.stabilizing.to_string(),
            opt(a),
            opt(b),
            String::new(),
        ])?;
    }
    out.write_record(["", "", "", "", "", "", "", trace.termination.as_str()])?;
    out.flush()
}

pub fn save_trace_csv(
    path: &Path,
    trace: &IterationTrace,
    offsets: Option<(&[f64], &[f64])>,
) -> io::Result<()> {
    let mut buf = Vec::new();
    write_trace_csv(&mut buf, trace, offsets)?;
    fs::write(path, buf)
}

/// Row-major matrix literal in the config syntax.
pub fn fmt_matrix(m: &Mat) -> String {
    (0..m.rows())
        .map(|i| {
            (0..m.cols())
                .map(|j| fmt_float(m[(i, j)]))
                .collect::<Vec<_>>()
                .join(", ")
        })
        .collect::<Vec<_>>()
        .join("; ")
}

/// Ordered `key: value` lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    entries: Vec<(String, String)>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl Display) {
        self.entries.push((key.into(), value.to_string()));
    }

    pub fn float(&mut self, key: impl Into<String>, value: f64) {
        self.push(key, fmt_float(value));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn render(&self) -> String {
        self.entries
            .iter()
            .map(|(k, v)| format!("{k}: {v}\n"))
            .collect()
    }

    pub fn save(&self, path: &Path) -> io::Result<()> {
        fs::write(path, self.render())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub curve_id: String,
    pub file: String,
    pub reason: String,
}

pub fn save_manifest(path: &Path, entries: &[ManifestEntry]) -> io::Result<()> {
    let mut out = csv::Writer::from_path(path)?;
    out.write_record(["curve_id", "file", "term_reason"])?;
    for e in entries {
        out.write_record([&e.curve_id, &e.file, &e.reason])?;
    }
    out.flush()
}
