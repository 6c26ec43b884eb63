//! Click-log JSON: one file per (image, user) session.
//!
//! ```json
//! {
//!   "version": 1,
//!   "image_id": "...", "user_id": "...", "user_kind": "robot",
//!   "config": { ... },            // optional robot-config echo
//!   "clicks": [{"i":1,"class":"lesion","xyz":[x,y,z],"provenance":"plain"}],
//!   "dice": [0.0, ...]
//! }
//! ```
//!
//! Field order is fixed so identical sessions serialize to identical
//! bytes. Human-authored logs may omit `provenance`; it defaults to
//! `"human"` on read.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::robots::{Click, ClickLog, Provenance, RobotConfig, UserKind};
use crate::sampling::ClickClass;
use crate::volume::Voxel;

use super::{atomic_write, read_file};

#[derive(Debug, Serialize, Deserialize)]
struct ClickLogFile {
    version: u32,
    image_id: String,
    user_id: String,
    user_kind: UserKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    config: Option<RobotConfig>,
    clicks: Vec<ClickRecord>,
    dice: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ClickRecord {
    i: u32,
    class: ClickClass,
    xyz: [i64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<Provenance>,
}

/// Serializes a log (optionally with its robot config) to stable bytes.
pub fn clicklog_to_bytes(log: &ClickLog, config: Option<&RobotConfig>) -> Result<Vec<u8>> {
    let file = ClickLogFile {
        version: 1,
        image_id: log.image_id.clone(),
        user_id: log.user_id.clone(),
        user_kind: log.user_kind,
        config: config.copied(),
        clicks: log
            .clicks
            .iter()
            .map(|c| ClickRecord {
                i: c.iteration,
                class: c.class,
                xyz: [c.voxel.x as i64, c.voxel.y as i64, c.voxel.z as i64],
                provenance: Some(c.provenance),
            })
            .collect(),
        dice: log.dice.clone(),
    };
    let mut bytes =
        serde_json::to_vec_pretty(&file).map_err(|e| Error::json("click log", e))?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Parses and validates a click-log document.
pub fn parse_clicklog(bytes: &[u8]) -> Result<ClickLog> {
    let file: ClickLogFile =
        serde_json::from_slice(bytes).map_err(|e| Error::json("click log", e))?;
    if file.version != 1 {
        return Err(Error::Format(format!(
            "unsupported click-log version {}, expected 1",
            file.version
        )));
    }
    let mut clicks = Vec::with_capacity(file.clicks.len());
    for (index, record) in file.clicks.iter().enumerate() {
        for (axis, &v) in ["x", "y", "z"].iter().zip(record.xyz.iter()) {
            if v < 0 {
                return Err(Error::Format(format!(
                    "clicks[{index}].xyz.{axis} is {v}; coordinates must be non-negative"
                )));
            }
            if v > u32::MAX as i64 {
                return Err(Error::Format(format!(
                    "clicks[{index}].xyz.{axis} is {v}; coordinate out of range"
                )));
            }
        }
        if record.i == 0 {
            return Err(Error::Format(format!(
                "clicks[{index}].i must be >= 1 (iterations are 1-based)"
            )));
        }
        clicks.push(Click {
            voxel: Voxel::new(record.xyz[0] as u32, record.xyz[1] as u32, record.xyz[2] as u32),
            class: record.class,
            iteration: record.i,
            provenance: record.provenance.unwrap_or(Provenance::Human),
        });
    }
    let log = ClickLog {
        image_id: file.image_id,
        user_id: file.user_id,
        user_kind: file.user_kind,
        clicks,
        dice: file.dice,
    };
    log.validate()?;
    Ok(log)
}

pub fn write_clicklog(log: &ClickLog, config: Option<&RobotConfig>, path: &Path) -> Result<()> {
    atomic_write(path, &clicklog_to_bytes(log, config)?)
}

pub fn read_clicklog(path: &Path) -> Result<ClickLog> {
    parse_clicklog(&read_file(path)?)
}
