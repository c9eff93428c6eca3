use std::path::Path;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BENCH_CSV_HEADER: &str = "seq_len,batch,channels,mode,phase,ms,repeats";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    Sequential,
    Parallel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Forward,
    Backward,
    Total,
}

/// Median wall time of one training-step phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchRecord {
    pub seq_len: usize,
    pub batch: usize,
    pub channels: usize,
    pub mode: RunMode,
    pub phase: Phase,
    pub ms: f64,
    pub repeats: usize,
}

impl BenchRecord {
    pub fn validate(&self) -> Result<()> {
        if self.repeats < 3 {
            return Err(Error::param(format!(
                "{} repeats, need at least 3",
                self.repeats
            )));
        }
        if !(self.ms > 0.0 && self.ms.is_finite()) {
            return Err(Error::param(format!(
                "time {} ms must be positive",
                self.ms
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl ReportFormat {
    /// `json` for a `.json` extension, CSV otherwise.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => Self::Json,
            _ => Self::Csv,
        }
    }
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            _ => Err(Error::param(format!("unknown report format {s:?}"))),
        }
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::malformed("CSV", e.to_string())
}

/// Flat records as CSV with a header row named after the fields.
pub fn encode_csv<T: Serialize>(records: &[T]) -> Result<Vec<u8>> {
    if records.is_empty() {
        return Err(Error::Empty("no records to write"));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r).map_err(csv_err)?;
    }
    w.into_inner()
        .map_err(|e| Error::malformed("CSV", e.to_string()))
}

pub fn encode_bench_csv(records: &[BenchRecord]) -> Result<Vec<u8>> {
    encode_csv(records)
}

/// A JSON array of flat records, newline-terminated.
pub fn encode_json<T: Serialize>(records: &[T]) -> Result<Vec<u8>> {
    if records.is_empty() {
        return Err(Error::Empty("no records to write"));
    }
    let mut out =
        serde_json::to_vec_pretty(records).map_err(|e| Error::malformed("JSON", e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

fn decode_csv<T: DeserializeOwned>(bytes: &[u8], header: &str) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_reader(bytes);
    let found = r
        .headers()
        .map_err(csv_err)?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if found != header {
        return Err(Error::malformed(
            "CSV",
            format!("header {found:?}, expected {header:?}"),
        ));
    }
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

pub fn decode_bench_csv(bytes: &[u8]) -> Result<Vec<BenchRecord>> {
    let records: Vec<BenchRecord> = decode_csv(bytes, BENCH_CSV_HEADER)?;
    records.iter().try_for_each(BenchRecord::validate)?;
    Ok(records)
}

pub fn decode_bench_json(bytes: &[u8]) -> Result<Vec<BenchRecord>> {
    let records: Vec<BenchRecord> =
        serde_json::from_slice(bytes).map_err(|e| Error::malformed("JSON", e.to_string()))?;
    records.iter().try_for_each(BenchRecord::validate)?;
    Ok(records)
}

/// Write `records` to `path`. Output bytes depend only on the records.
pub fn emit_report<T: Serialize>(
    records: &[T],
    format: ReportFormat,
    path: impl AsRef<Path>,
) -> Result<()> {
    let bytes = match format {
        ReportFormat::Csv => encode_csv(records)?,
        ReportFormat::Json => encode_json(records)?,
    };
    std::fs::write(path, bytes)?;
    Ok(())
}
