//! Run configuration: images, predictor, robots, seeds.
//!
//! Parsing is split from loading: `RunConfig::from_json` validates the
//! document in isolation, `load_run_config` additionally checks that every
//! referenced path exists. A JSON Schema for this format ships in
//! `schemas/run-config.schema.json`.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::morphology::Connectivity;
use crate::phantom::PhantomSpec;
use crate::robots::{RobotConfig, RobotKind};

use super::read_file;

fn default_connectivity() -> u8 {
    26
}

fn default_iterations() -> u32 {
    10
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub version: u32,
    pub master_seed: u64,
    #[serde(default = "default_connectivity")]
    pub connectivity: u8,
    #[serde(default = "default_iterations")]
    pub iterations: u32,
    pub output_dir: PathBuf,
    pub predictor: PredictorConfig,
    pub images: Vec<ImageEntry>,
    pub robots: Vec<RobotEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PredictorConfig {
    /// Always predicts the empty mask.
    Null,
    /// Label-aware mock that reveals the ground truth around clicks.
    OracleGrow {
        reveal_radius: u32,
        #[serde(default)]
        noise: u32,
        #[serde(default)]
        seed: Option<u64>,
    },
    /// Serves recorded per-iteration masks from a session directory.
    Replay { dir: PathBuf },
}

/// One image: either a pair of volume paths or an inline phantom spec.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImageEntry {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phantom: Option<PhantomSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RobotEntry {
    pub id: String,
    pub kind: RobotKind,
    #[serde(default)]
    pub p_perturb: f64,
    #[serde(default)]
    pub p_system: f64,
    #[serde(default)]
    pub amplitude: u32,
    /// Defaults to the run's master seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl RobotEntry {
    pub fn to_robot_config(&self, master_seed: u64) -> RobotConfig {
        RobotConfig {
            kind: self.kind,
            p_perturb: self.p_perturb,
            p_system: self.p_system,
            amplitude: self.amplitude,
            seed: self.seed.unwrap_or(master_seed),
        }
    }
}

pub(crate) fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || "._-".contains(c))
}

impl RunConfig {
    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let config: RunConfig =
            serde_json::from_slice(bytes).map_err(|e| Error::json("run config", e))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != 1 {
            return Err(Error::Config(format!(
                "unsupported config version {}, expected 1",
                self.version
            )));
        }
        if self.connectivity != 6 && self.connectivity != 26 {
            return Err(Error::Config(format!(
                "connectivity must be 6 or 26, got {}",
                self.connectivity
            )));
        }
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be >= 1".into()));
        }
        if self.images.is_empty() {
            return Err(Error::Config("config lists no images".into()));
        }
        if self.robots.is_empty() {
            return Err(Error::Config("config lists no robots".into()));
        }
        let mut image_ids = BTreeSet::new();
        for entry in &self.images {
            if !valid_id(&entry.id) {
                return Err(Error::Config(format!(
                    "image id '{}' must be non-empty and contain only [A-Za-z0-9._-]",
                    entry.id
                )));
            }
            if !image_ids.insert(&entry.id) {
                return Err(Error::Config(format!("duplicate image id '{}'", entry.id)));
            }
            match (&entry.image, &entry.label, &entry.phantom) {
                (Some(_), Some(_), None) => {}
                (None, None, Some(spec)) => {
                    spec.validate()?;
                }
                _ => {
                    return Err(Error::Config(format!(
                        "image '{}' must provide either image+label paths or a phantom spec",
                        entry.id
                    )));
                }
            }
        }
        let mut robot_ids = BTreeSet::new();
        for robot in &self.robots {
            if !valid_id(&robot.id) {
                return Err(Error::Config(format!(
                    "robot id '{}' must be non-empty and contain only [A-Za-z0-9._-]",
                    robot.id
                )));
            }
            if !robot_ids.insert(&robot.id) {
                return Err(Error::Config(format!("duplicate robot id '{}'", robot.id)));
            }
            robot.to_robot_config(self.master_seed).validate()?;
        }
        if let PredictorConfig::OracleGrow { reveal_radius, .. } = self.predictor {
            if reveal_radius == 0 {
                return Err(Error::Config("oracle_grow reveal_radius must be >= 1".into()));
            }
        }
        Ok(())
    }

    pub fn connectivity_enum(&self) -> Connectivity {
        if self.connectivity == 6 { Connectivity::Six } else { Connectivity::TwentySix }
    }
}

/// Parses a config file and verifies every referenced path exists.
pub fn load_run_config(path: &Path) -> Result<RunConfig> {
    let config = RunConfig::from_json(&read_file(path)?)?;
    let base = path.parent().unwrap_or(Path::new("."));
    for entry in &config.images {
        for p in [&entry.image, &entry.label].into_iter().flatten() {
            let resolved = resolve(base, p);
            if !resolved.exists() {
                return Err(Error::MissingFile(resolved));
            }
            if p.extension().and_then(|e| e.to_str()) == Some("bin") {
                let sidecar = super::native::sidecar_path(&resolved);
                if !sidecar.exists() {
                    return Err(Error::MissingFile(sidecar));
                }
            }
        }
    }
    if let PredictorConfig::Replay { dir } = &config.predictor {
        let resolved = resolve(base, dir);
        if !resolved.exists() {
            return Err(Error::MissingFile(resolved));
        }
    }
    Ok(config)
}

/// Paths inside a config are relative to the config file's directory.
pub fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() { p.to_path_buf() } else { base.join(p) }
}

/// The parameter grid swept by the `sweep` subcommand.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub p_perturb: Vec<f64>,
    pub p_system: Vec<f64>,
    pub amplitude: Vec<u32>,
}

impl SweepGrid {
    /// Parses `"p_perturb=0,0.134;p_system=0,0.134;a=0,35"`.
    pub fn parse(s: &str) -> Result<Self> {
        let mut p_perturb = None;
        let mut p_system = None;
        let mut amplitude = None;
        for part in s.split(';') {
            let part = part.trim();
            if part.is_empty() {
                continue;
            }
            let (key, values) = part.split_once('=').ok_or_else(|| {
                Error::Config(format!("grid segment '{part}' is not of the form key=v1,v2"))
            })?;
            match key.trim() {
                "p_perturb" => p_perturb = Some(parse_probs(values)?),
                "p_system" => p_system = Some(parse_probs(values)?),
                "a" => amplitude = Some(parse_amplitudes(values)?),
                other => {
                    return Err(Error::Config(format!(
                        "unknown grid key '{other}'; expected p_perturb, p_system, or a"
                    )));
                }
            }
        }
        let missing = |k: &str| Error::Config(format!("grid is missing the '{k}' axis"));
        Ok(SweepGrid {
            p_perturb: p_perturb.ok_or_else(|| missing("p_perturb"))?,
            p_system: p_system.ok_or_else(|| missing("p_system"))?,
            amplitude: amplitude.ok_or_else(|| missing("a"))?,
        })
    }

    /// Grid points as (p_perturb, p_system, amplitude) tuples.
    ///
    /// `diagonal` zips the two probability axes (they must have equal
    /// length) instead of taking their product.
    pub fn points(&self, diagonal: bool) -> Result<Vec<(f64, f64, u32)>> {
        let mut out = Vec::new();
        if diagonal {
            if self.p_perturb.len() != self.p_system.len() {
                return Err(Error::Config(format!(
                    "diagonal sweep needs equal-length probability lists, got {} and {}",
                    self.p_perturb.len(),
                    self.p_system.len()
                )));
            }
            for (&pp, &ps) in self.p_perturb.iter().zip(self.p_system.iter()) {
                for &a in &self.amplitude {
                    out.push((pp, ps, a));
                }
            }
        } else {
            for &pp in &self.p_perturb {
                for &ps in &self.p_system {
                    for &a in &self.amplitude {
                        out.push((pp, ps, a));
                    }
                }
            }
        }
        Ok(out)
    }
}

fn parse_probs(values: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for v in values.split(',') {
        let p: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("'{v}' is not a number")))?;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Config(format!("probability {p} outside [0,1]")));
        }
        out.push(p);
    }
    if out.is_empty() {
        return Err(Error::Config("empty grid axis".into()));
    }
    Ok(out)
}

fn parse_amplitudes(values: &str) -> Result<Vec<u32>> {
    let mut out = Vec::new();
    for v in values.split(',') {
        let a: u32 = v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("'{v}' is not a non-negative integer")))?;
        out.push(a);
    }
    if out.is_empty() {
        return Err(Error::Config("empty grid axis".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_config() -> String {
        r#"{
            "version": 1,
            "master_seed": 7,
            "output_dir": "out",
            "predictor": {"kind": "oracle_grow", "reveal_radius": 4},
            "images": [{"id": "ph1", "phantom": {
                "id": "ph1", "dims": [16,16,16], "lesions": 1,
                "radius_range": [2,3], "lesion_suv_range": [4.0,6.0],
                "background_mean": 0.5, "background_sigma": 0.1, "seed": 3
            }}],
            "robots": [{"id": "R1", "kind": "R1"}]
        }"#
        .to_string()
    }

    #[test]
    fn minimal_config_parses() {
        let config = RunConfig::from_json(minimal_config().as_bytes()).unwrap();
        assert_eq!(config.iterations, 10);
        assert_eq!(config.connectivity, 26);
        let robot = config.robots[0].to_robot_config(config.master_seed);
        assert_eq!(robot.seed, 7);
        assert_eq!(robot.kind, RobotKind::R1);
    }

    #[test]
    fn duplicate_robot_ids_rejected() {
        let json = minimal_config().replace(
            r#""robots": [{"id": "R1", "kind": "R1"}]"#,
            r#""robots": [{"id": "R1", "kind": "R1"}, {"id": "R1", "kind": "R4"}]"#,
        );
        let err = RunConfig::from_json(json.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("duplicate robot id"), "{err}");
    }

    #[test]
    fn image_entry_requires_exactly_one_source() {
        let json = minimal_config().replace(
            r#"{"id": "ph1", "phantom": {
                "id": "ph1", "dims": [16,16,16], "lesions": 1,
                "radius_range": [2,3], "lesion_suv_range": [4.0,6.0],
                "background_mean": 0.5, "background_sigma": 0.1, "seed": 3
            }}"#,
            r#"{"id": "ph1"}"#,
        );
        assert!(RunConfig::from_json(json.as_bytes()).is_err());
    }

    #[test]
    fn grid_parses_and_expands() {
        let grid = SweepGrid::parse("p_perturb=0,0.134;p_system=0,0.134;a=0,35").unwrap();
        assert_eq!(grid.points(false).unwrap().len(), 8);
        let diag = grid.points(true).unwrap();
        assert_eq!(diag.len(), 4);
        assert!(diag.contains(&(0.134, 0.134, 35)));
    }

    #[test]
    fn grid_rejects_unknown_keys_and_bad_probs() {
        assert!(SweepGrid::parse("p_perturb=0;p_system=0;b=1").is_err());
        assert!(SweepGrid::parse("p_perturb=0;p_system=2.0;a=1").is_err());
        assert!(SweepGrid::parse("p_perturb=0;a=1").is_err());
    }

    #[test]
    fn load_checks_referenced_paths() {
        let dir = tempfile::tempdir().unwrap();
        let config_path = dir.path().join("run.json");
        let json = r#"{
            "version": 1, "master_seed": 1, "output_dir": "out",
            "predictor": {"kind": "null"},
            "images": [{"id": "a", "image": "missing.bin", "label": "missing_label.bin"}],
            "robots": [{"id": "R1", "kind": "R1"}]
        }"#;
        std::fs::write(&config_path, json).unwrap();
        let err = load_run_config(&config_path).unwrap_err();
        assert!(matches!(err, Error::MissingFile(_)), "{err}");
    }
}
