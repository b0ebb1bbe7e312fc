//! Delimited `timestamp,log_price` record files.
//!
//! Timestamps are decimal seconds since the epoch or ISO-8601 datetimes
//! (naive datetimes are read as UTC). A non-numeric first line is taken as
//! a header. Consecutive records with equal timestamps are collapsed into
//! their mean value.

use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime};

use crate::timeseries::TimeSeries;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IngestOptions {
    pub delimiter: u8,
    /// `None` detects a header from the first line.
    pub header: Option<bool>,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            delimiter: b',',
            header: None,
        }
    }
}

pub fn parse_timestamp(field: &str) -> Option<f64> {
    if let Ok(t) = field.parse::<f64>() {
        return t.is_finite().then_some(t);
    }
    let from_naive = |n: NaiveDateTime| {
        let utc = n.and_utc();
        utc.timestamp() as f64 + f64::from(utc.timestamp_subsec_nanos()) * 1e-9
    };
    if let Ok(dt) = DateTime::parse_from_rfc3339(field) {
        return Some(dt.timestamp() as f64 + f64::from(dt.timestamp_subsec_nanos()) * 1e-9);
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(n) = NaiveDateTime::parse_from_str(field, fmt) {
            return Some(from_naive(n));
        }
    }
    NaiveDate::parse_from_str(field, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(from_naive)
}

pub fn ingest(path: &Path, opts: IngestOptions) -> Result<TimeSeries> {
    let bytes = std::fs::read(path)?;
    let label = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_records(&bytes, opts, &label)
}

pub fn parse_records(bytes: &[u8], opts: IngestOptions, label: &str) -> Result<TimeSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(opts.delimiter)
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(bytes);

    // (timestamp, value sum, count, line)
    let mut rows: Vec<(f64, f64, usize, u64)> = Vec::new();
    let mut first = true;
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed = (record.len() == 2)
            .then(|| Some((parse_timestamp(&record[0])?, parse_value(&record[1])?)))
            .flatten();
        let is_first = std::mem::replace(&mut first, false);
        let (t, v) = match parsed {
            Some(tv) if !(is_first && opts.header == Some(true)) => tv,
            _ if is_first && opts.header != Some(false) => continue,
            _ => {
                return Err(Error::Parse {
                    line,
                    message: format!(
                        "expected `timestamp{}log_price`, got {:?}",
                        opts.delimiter as char,
                        record.iter().collect::<Vec<_>>()
                    ),
                })
            }
        };
        match rows.last_mut() {
            Some(last) if last.0 == t => {
                last.1 += v;
                last.2 += 1;
            }
            Some(last) if t < last.0 => {
                return Err(Error::Parse {
                    line,
                    message: format!("timestamp {t} precedes {} on line {}", last.0, last.3),
                })
            }
            _ => rows.push((t, v, 1, line)),
        }
    }
    if rows.is_empty() {
        return Err(Error::InsufficientData("record file has no records".into()));
    }
    let (timestamps, values): (Vec<f64>, Vec<f64>) =
        rows.iter().map(|&(t, s, n, _)| (t, s / n as f64)).unzip();
    TimeSeries::new(timestamps, values, label)
}

fn parse_value(field: &str) -> Option<f64> {
    field.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// `timestamp,log_price` header plus one line per record in shortest
/// round-trip decimal form.
pub fn format_records(timestamps: &[f64], values: &[f64]) -> String {
    use std::fmt::Write;
    let mut out = String::with_capacity(timestamps.len() * 32);
    out.push_str("timestamp,log_price\n");
    for (t, v) in timestamps.iter().zip(values) {
        writeln!(out, "{t},{v}").unwrap();
    }
    out
}

pub fn write_records(path: &Path, timestamps: &[f64], values: &[f64]) -> Result<()> {
    super::atomic_write(path, format_records(timestamps, values).as_bytes())
}
