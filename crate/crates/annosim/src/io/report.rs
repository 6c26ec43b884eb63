//! Report emission: per-user metrics (JSON + CSV), robot-vs-annotator
//! comparisons, sweep tables, and the correlation summary.
//!
//! Reports are deterministic: rows sort by user id and every number is
//! rounded to four decimals.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::MetricsVector;
use crate::robots::UserKind;

use super::{atomic_write, read_file};

/// Four-decimal rounding applied to all reported values.
pub fn round4(x: f64) -> f64 {
    (x * 10_000.0).round() / 10_000.0
}

fn fmt4(x: Option<f64>) -> String {
    match x {
        Some(v) => format!("{v:.4}"),
        None => "nan".into(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UserMetricsRow {
    pub user_id: String,
    pub user_kind: UserKind,
    pub images: usize,
    pub m1: f64,
    pub m2: Option<f64>,
    pub m3: f64,
    pub m4: f64,
    pub m5: f64,
}

impl UserMetricsRow {
    pub fn new(
        user_id: String,
        user_kind: UserKind,
        images: usize,
        vector: &MetricsVector,
    ) -> Self {
        UserMetricsRow {
            user_id,
            user_kind,
            images,
            m1: round4(vector.m1),
            m2: vector.m2.map(round4),
            m3: round4(vector.m3),
            m4: round4(vector.m4),
            m5: round4(vector.m5),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub version: u32,
    pub connectivity: u8,
    pub users: Vec<UserMetricsRow>,
}

impl MetricsReport {
    pub fn new(connectivity: u8, mut users: Vec<UserMetricsRow>) -> Self {
        users.sort_by(|a, b| a.user_id.cmp(&b.user_id));
        MetricsReport { version: 1, connectivity, users }
    }

    pub fn to_json_bytes(&self) -> Result<Vec<u8>> {
        let mut bytes =
            serde_json::to_vec_pretty(self).map_err(|e| Error::json("metrics report", e))?;
        bytes.push(b'\n');
        Ok(bytes)
    }

    pub fn to_csv_bytes(&self) -> Vec<u8> {
        let mut out = String::from("user_id,user_kind,images,m1,m2,m3,m4,m5\n");
        for row in &self.users {
            let kind = match row.user_kind {
                UserKind::Robot => "robot",
                UserKind::Human => "human",
            };
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                row.user_id,
                kind,
                row.images,
                fmt4(Some(row.m1)),
                fmt4(row.m2),
                fmt4(Some(row.m3)),
                fmt4(Some(row.m4)),
                fmt4(Some(row.m5)),
            ));
        }
        out.into_bytes()
    }

    /// Writes `<stem>.json` and `<stem>.csv` for the given output path;
    /// an existing `.json` or `.csv` extension is treated as the stem.
    pub fn write(&self, out: &Path) -> Result<()> {
        let stem = strip_report_extension(out);
        atomic_write(&stem.with_extension("json"), &self.to_json_bytes()?)?;
        atomic_write(&stem.with_extension("csv"), &self.to_csv_bytes())
    }
}

fn strip_report_extension(path: &Path) -> std::path::PathBuf {
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") | Some("csv") => path.with_extension(""),
        _ => path.to_path_buf(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareReport {
    pub version: u32,
    pub robot: String,
    pub annotators: Vec<String>,
    pub m6_user_shift: f64,
    pub m7_dice_difference: f64,
    pub robot_metrics: UserMetricsRow,
    pub annotator_metrics: Vec<UserMetricsRow>,
}

impl CompareReport {
    pub fn to_json_bytes(&self) -> Result<Vec<u8>> {
        let mut bytes =
            serde_json::to_vec_pretty(self).map_err(|e| Error::json("compare report", e))?;
        bytes.push(b'\n');
        Ok(bytes)
    }
}

/// One sweep grid point with its comparison metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub p_perturb: f64,
    pub p_system: f64,
    pub amplitude: u32,
    pub m6: f64,
    pub m7: f64,
}

pub fn sweep_to_csv_bytes(rows: &[SweepRow]) -> Vec<u8> {
    let mut out = String::from("p_perturb,p_system,a,m6,m7\n");
    for row in rows {
        out.push_str(&format!(
            "{:.4},{:.4},{},{:.4},{:.4}\n",
            row.p_perturb, row.p_system, row.amplitude, row.m6, row.m7
        ));
    }
    out.into_bytes()
}

/// Parses a sweep CSV; the `m6` and `m7` columns are located by header
/// name, so reordered or extended tables stay readable.
pub fn parse_sweep_csv(bytes: &[u8]) -> Result<Vec<SweepRow>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
    let headers = reader
        .headers()
        .map_err(|e| Error::Format(format!("sweep csv header: {e}")))?
        .clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Format(format!("sweep csv is missing the '{name}' column")))
    };
    let (ci_pp, ci_ps, ci_a) = (col("p_perturb")?, col("p_system")?, col("a")?);
    let (ci_m6, ci_m7) = (col("m6")?, col("m7")?);
    let parse_f64 = |record: &csv::StringRecord, idx: usize, line: usize| -> Result<f64> {
        let raw = record.get(idx).unwrap_or_default();
        let v: f64 = raw
            .parse()
            .map_err(|_| Error::Format(format!("sweep csv line {line}: '{raw}' is not a number")))?;
        if !v.is_finite() {
            return Err(Error::Format(format!("sweep csv line {line}: non-finite value")));
        }
        Ok(v)
    };
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Format(format!("sweep csv: {e}")))?;
        let line = i + 2;
        let amplitude = {
            let raw = record.get(ci_a).unwrap_or_default();
            raw.parse::<u32>().map_err(|_| {
                Error::Format(format!("sweep csv line {line}: '{raw}' is not an amplitude"))
            })?
        };
        rows.push(SweepRow {
            p_perturb: parse_f64(&record, ci_pp, line)?,
            p_system: parse_f64(&record, ci_ps, line)?,
            amplitude,
            m6: parse_f64(&record, ci_m6, line)?,
            m7: parse_f64(&record, ci_m7, line)?,
        });
    }
    Ok(rows)
}

pub fn read_sweep_csv(path: &Path) -> Result<Vec<SweepRow>> {
    parse_sweep_csv(&read_file(path)?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrelateReport {
    pub version: u32,
    pub rho: f64,
    pub points: usize,
}

impl CorrelateReport {
    pub fn to_json_bytes(&self) -> Result<Vec<u8>> {
        let mut bytes =
            serde_json::to_vec_pretty(self).map_err(|e| Error::json("correlate report", e))?;
        bytes.push(b'\n');
        Ok(bytes)
    }
}
