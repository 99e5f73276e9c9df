//! CSV and JSON output with a fixed, byte-stable layout.

use std::io::{Read, Write};

use num_complex::Complex64;
use serde::Serialize;
use serde_json::Value;

use crate::error::{Result, SpinError};
use crate::spectra::{Fid, Spectrum};

pub const CSV_HEADER: [&str; 3] = ["t_or_f", "re", "im"];
pub const REPORT_SCHEMA: &str = "spinor-report/1";

fn io_err(e: impl std::fmt::Display) -> SpinError {
    SpinError::InvalidArgument(format!("i/o: {e}"))
}

/// 15 significant digits in scientific notation.
fn fmt_num(v: f64) -> String {
    format!("{v:.14e}")
}

/// Writes `(abscissa, value)` rows with the `t_or_f,re,im` header and LF
/// line endings.
pub fn write_complex_csv<W: Write>(out: W, rows: impl IntoIterator<Item = (f64, Complex64)>) -> Result<()> {
    write_csv_with_header(out, CSV_HEADER, rows)
}

pub fn write_csv_with_header<W: Write>(
    out: W,
    header: [&str; 3],
    rows: impl IntoIterator<Item = (f64, Complex64)>,
) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(header).map_err(io_err)?;
    for (x, z) in rows {
        w.write_record([fmt_num(x), fmt_num(z.re), fmt_num(z.im)]).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn fid_to_csv(fid: &Fid) -> Result<String> {
    let mut buf = Vec::new();
    write_complex_csv(&mut buf, fid.samples.iter().enumerate().map(|(k, z)| (fid.time(k), *z)))?;
    Ok(String::from_utf8(buf).expect("ascii"))
}

/// Spectrum rows in ascending frequency.
pub fn spectrum_to_csv(spec: &Spectrum) -> Result<String> {
    let mut rows: Vec<(f64, Complex64)> = (0..spec.len()).map(|j| (spec.frequency(j), spec.bins[j])).collect();
    rows.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite"));
    let mut buf = Vec::new();
    write_complex_csv(&mut buf, rows)?;
    Ok(String::from_utf8(buf).expect("ascii"))
}

/// Reads `t_or_f,re,im` rows.
pub fn read_complex_csv<R: Read>(input: R) -> Result<Vec<(f64, Complex64)>> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = r.headers().map_err(io_err)?.clone();
    if header.len() != 3 || header.iter().zip(CSV_HEADER).any(|(a, b)| a.trim() != b) {
        return Err(SpinError::InvalidArgument(format!(
            "expected CSV header {}, found {}",
            CSV_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(io_err)?;
        let field = |j: usize| -> Result<f64> {
            rec.get(j)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| SpinError::InvalidArgument(format!("row {}: column {} is not a finite number", i + 2, j + 1)))
        };
        rows.push((field(0)?, Complex64::new(field(1)?, field(2)?)));
    }
    Ok(rows)
}

/// Rebuilds an FID from CSV rows; the time column must be uniform.
pub fn fid_from_rows(rows: &[(f64, Complex64)]) -> Result<Fid> {
    if rows.len() < 2 {
        return Err(SpinError::InvalidArgument("an FID needs at least two rows".into()));
    }
    let t0 = rows[0].0;
    let dt = (rows[rows.len() - 1].0 - t0) / (rows.len() - 1) as f64;
    let tol = 1e-9 * dt.abs().max(t0.abs());
    for (k, (t, _)) in rows.iter().enumerate() {
        let expected = t0 + k as f64 * dt;
        if (t - expected).abs() > tol.max(1e-12 * expected.abs()) {
            return Err(SpinError::InvalidArgument(format!("row {}: time column is not uniform", k + 2)));
        }
    }
    Fid::new(dt, t0, rows.iter().map(|r| r.1).collect())
}

/// Pretty JSON envelope `{kind, report, schema}` with a trailing newline.
/// Object keys are emitted in sorted order.
pub fn report_json<T: Serialize>(kind: &str, body: &T) -> Result<String> {
    let body = serde_json::to_value(body).map_err(io_err)?;
    let mut map = serde_json::Map::new();
    map.insert("schema".into(), Value::String(REPORT_SCHEMA.into()));
    map.insert("kind".into(), Value::String(kind.into()));
    map.insert("report".into(), sort_keys(body));
    let mut s = serde_json::to_string_pretty(&Value::Object(map)).map_err(io_err)?;
    s.push('\n');
    Ok(s)
}

fn sort_keys(v: Value) -> Value {
    match v {
        Value::Object(m) => {
            let mut entries: Vec<(String, Value)> = m.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            Value::Object(entries.into_iter().map(|(k, v)| (k, sort_keys(v))).collect())
        }
        Value::Array(a) => Value::Array(a.into_iter().map(sort_keys).collect()),
        other => other,
    }
}
