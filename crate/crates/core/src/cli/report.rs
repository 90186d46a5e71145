//! Report files written by `analyze`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::analysis::{AnalysisReport, Interval};
use crate::{Error, Result};

pub const BINS_FILE: &str = "report_bins.csv";
pub const TTEST_FILE: &str = "report_ttest.csv";
pub const JSON_FILE: &str = "report.json";

const DECIMALS: i32 = 6;

fn real(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_owned()
    } else {
        format!("{x:.6}")
    }
}

fn opt_real(x: Option<f64>) -> String {
    x.map(real).unwrap_or_default()
}

fn edges(bin: Option<Interval>) -> [String; 2] {
    match bin {
        Some(b) => [real(b.lo), real(b.hi)],
        None => ["out_of_range".to_owned(), "out_of_range".to_owned()],
    }
}

fn csv_file(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Internal(format!("{}: {other:?}", path.display())),
    }
}

pub fn write_bins_csv(report: &AnalysisReport, path: &Path) -> Result<()> {
    let mut w = csv_file(path)?;
    let err = csv_err(path);
    w.write_record(["system", "split", "bin_lo", "bin_hi", "mean_delta", "std_delta", "count"])
        .map_err(&err)?;
    for row in &report.bins {
        let [lo, hi] = edges(row.bin);
        w.write_record([
            row.system.clone(),
            row.split.clone(),
            lo,
            hi,
            opt_real(row.summary.mean),
            opt_real(row.summary.std),
            row.summary.count.to_string(),
        ])
        .map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_ttest_csv(report: &AnalysisReport, path: &Path) -> Result<()> {
    let mut w = csv_file(path)?;
    let err = csv_err(path);
    w.write_record(["system", "bin_lo", "bin_hi", "t", "p", "n_it", "n_oot"])
        .map_err(&err)?;
    for row in &report.t_tests {
        let [lo, hi] = edges(Some(row.bin));
        w.write_record([
            row.system.clone(),
            lo,
            hi,
            opt_real(row.test.map(|t| t.t)),
            opt_real(row.test.map(|t| t.p)),
            row.n_it.to_string(),
            row.n_oot.to_string(),
        ])
        .map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Rounds every float to the report precision.
fn round_floats(v: &mut Value) {
    match v {
        Value::Number(n) if !(n.is_i64() || n.is_u64()) => {
            if let Some(x) = n.as_f64() {
                let scale = 10f64.powi(DECIMALS);
                let rounded = (x * scale).round() / scale;
                if let Some(r) = serde_json::Number::from_f64(if rounded == 0.0 { 0.0 } else { rounded }) {
                    *n = r;
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_floats),
        Value::Object(map) => map.values_mut().for_each(round_floats),
        _ => {}
    }
}

/// Writes `value` as pretty JSON with six-decimal floats.
pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut tree = serde_json::to_value(value).map_err(|e| Error::Internal(format!("serializing report: {e}")))?;
    round_floats(&mut tree);
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, &tree).map_err(|e| Error::Internal(format!("writing report: {e}")))?;
    writeln!(out).and_then(|_| out.flush()).map_err(|e| Error::io(path, e))
}

pub fn write_all(report: &AnalysisReport, out_dir: &Path) -> Result<()> {
    write_bins_csv(report, &out_dir.join(BINS_FILE))?;
    write_ttest_csv(report, &out_dir.join(TTEST_FILE))?;
    write_json(report, &out_dir.join(JSON_FILE))
}
