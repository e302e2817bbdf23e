//! File formats: the regret-summary CSV and `key=value` metadata files.
//!
//! The CSV header is exactly `t,mean,p05,p25,p50,p75,p95`, one row per round,
//! floats written with 17 significant digits. Metadata files hold one
//! `key=value` pair per line; blank lines and `#` comments are ignored.
//! They double as configuration files, so a run can be replayed from the
//! metadata it wrote.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::regret::{RegretSummary, RoundSummary};

pub const SUMMARY_HEADER: [&str; 7] = ["t", "mean", "p05", "p25", "p50", "p75", "p95"];

/// 17 significant digits in scientific notation; round-trips every `f64`.
pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

pub fn write_summary_csv<W: Write>(summary: &RegretSummary, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for r in &summary.rounds {
        let mut rec = Vec::with_capacity(7);
        rec.push(r.t.to_string());
        rec.push(format_float(r.mean));
        rec.extend(r.quantiles.iter().map(|q| format_float(*q)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Parsed rows of a summary CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryTable {
    pub rounds: Vec<RoundSummary>,
}

/// Reads a summary CSV, checking the header, column count, that `t` runs
/// `1, 2, …`, and that the quantile columns are non-decreasing.
pub fn read_summary_csv<R: Read>(input: R) -> Result<SummaryTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input);
    let mut records = rdr.records();
    let parse_err = |line: usize, column: usize, message: String| Error::Parse {
        line,
        column,
        message,
    };

    let header = records
        .next()
        .ok_or_else(|| parse_err(1, 1, "empty file".into()))??;
    if header.len() != SUMMARY_HEADER.len() {
        return Err(parse_err(
            1,
            1,
            format!(
                "expected {} columns, found {}",
                SUMMARY_HEADER.len(),
                header.len()
            ),
        ));
    }
    for (i, (got, want)) in header.iter().zip(SUMMARY_HEADER).enumerate() {
        if got != want {
            return Err(parse_err(
                1,
                i + 1,
                format!("expected column {want:?}, found {got:?}"),
            ));
        }
    }

    let mut rounds = Vec::new();
    for (k, rec) in records.enumerate() {
        let line = k + 2;
        let rec = rec?;
        if rec.len() != SUMMARY_HEADER.len() {
            return Err(parse_err(
                line,
                1,
                format!("expected 7 fields, found {}", rec.len()),
            ));
        }
        let t: usize = rec[0]
            .parse()
            .map_err(|_| parse_err(line, 1, format!("bad round index {:?}", &rec[0])))?;
        if t != k + 1 {
            return Err(parse_err(
                line,
                1,
                format!("expected round {}, found {t}", k + 1),
            ));
        }
        let mut vals = [0.0f64; 6];
        for (j, v) in vals.iter_mut().enumerate() {
            let field = &rec[j + 1];
            *v = field
                .parse()
                .map_err(|_| parse_err(line, j + 2, format!("not a number: {field:?}")))?;
            if v.is_nan() {
                return Err(parse_err(line, j + 2, "NaN value".into()));
            }
        }
        let quantiles = [vals[1], vals[2], vals[3], vals[4], vals[5]];
        if let Some(j) = quantiles.windows(2).position(|w| w[1] < w[0]) {
            return Err(parse_err(line, j + 4, "quantile columns decrease".into()));
        }
        rounds.push(RoundSummary {
            t,
            mean: vals[0],
            quantiles,
        });
    }
    Ok(SummaryTable { rounds })
}

/// Ordered `key=value` pairs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeyValues(BTreeMap<String, String>);

impl KeyValues {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                column: 1,
                message: "expected key=value".into(),
            })?;
            let key = k.trim();
            if key.is_empty()
                || !key
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.')
            {
                return Err(Error::Parse {
                    line: i + 1,
                    column: 1,
                    message: format!("invalid key {key:?}"),
                });
            }
            if map.insert(key.to_string(), v.trim().to_string()).is_some() {
                return Err(Error::Parse {
                    line: i + 1,
                    column: 1,
                    message: format!("duplicate key {key:?}"),
                });
            }
        }
        Ok(Self(map))
    }

    pub fn insert(&mut self, key: impl Into<String>, value: impl ToString) {
        self.0.insert(key.into(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    /// Parses the value under `key`, if present.
    pub fn get_parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| Error::InvalidInput(format!("cannot parse {key}={v:?}")))
            })
            .transpose()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_text(&self) -> String {
        self.0.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }
}
