//! Behaviour and performance metrics over click logs.
//!
//! Five per-user metrics on the percentage scale:
//!
//! * label conformity — fraction of lesion clicks inside the ground truth;
//! * centerness — `bound / (bound + cent_dist)` for conforming clicks,
//!   1 at component centers, 0 on boundaries;
//! * click diversity — label components touched, relative to what the
//!   click budget could reach;
//! * label proximity — mean inverse distance of non-conforming clicks to
//!   the label; low values mean systematic disagreement;
//! * consistent improvement — fraction of iterations that strictly raise
//!   the Dice score.
//!
//! Two comparison metrics: user shift (mean absolute gap across the five
//! metrics between a robot and a set of annotators) and Dice difference
//! (mean absolute per-iteration Dice gap). All are computed over lesion
//! clicks: background clicks correct over-segmentation outside the label,
//! so they are non-conforming by construction and would drown the
//! conformity signal.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::morphology::{
    boundary_set, component_center, connected_components, dist_to_mask, Component, Connectivity,
};
use crate::robots::ClickLog;
use crate::sampling::ClickClass;
use crate::volume::{BinaryVolume, Voxel};

/// Per-user values of the five behaviour metrics, in `[0, 100]`.
///
/// `m2` is `None` when a user has no conforming clicks anywhere, which
/// leaves centerness undefined.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MetricsVector {
    pub m1: f64,
    pub m2: Option<f64>,
    pub m3: f64,
    pub m4: f64,
    pub m5: f64,
}

impl MetricsVector {
    fn values(&self) -> Result<[f64; 5]> {
        let m2 = self
            .m2
            .ok_or_else(|| Error::Undefined("centerness has no conforming clicks".into()))?;
        Ok([self.m1, m2, self.m3, self.m4, self.m5])
    }
}

/// Cached per-label geometry shared by the click-level metrics.
struct LabelGeometry {
    components: Vec<Component>,
    /// Component id per voxel; 0 for background.
    component_of: Vec<u32>,
    /// Interior center per component, indexed by `id - 1`.
    centers: Vec<Voxel>,
    boundary: Vec<Voxel>,
}

impl LabelGeometry {
    fn new(label: &BinaryVolume, connectivity: Connectivity) -> Self {
        let components = connected_components(label, connectivity);
        let mut component_of = vec![0u32; label.dims().len()];
        let mut centers = Vec::with_capacity(components.len());
        for comp in &components {
            for &v in comp.voxels() {
                component_of[label.dims().index(v)] = comp.id();
            }
            centers.push(component_center(comp, label));
        }
        LabelGeometry { components, component_of, centers, boundary: boundary_set(label) }
    }
}

/// A study: labels per image, one log per (image, user) pair.
pub struct StudySet {
    connectivity: Connectivity,
    labels: BTreeMap<String, BinaryVolume>,
    geometry: BTreeMap<String, LabelGeometry>,
    /// user id -> image id -> log
    logs: BTreeMap<String, BTreeMap<String, ClickLog>>,
}

impl StudySet {
    pub fn new(connectivity: Connectivity) -> Self {
        StudySet {
            connectivity,
            labels: BTreeMap::new(),
            geometry: BTreeMap::new(),
            logs: BTreeMap::new(),
        }
    }

    pub fn add_label(&mut self, image_id: impl Into<String>, label: BinaryVolume) -> Result<()> {
        let image_id = image_id.into();
        if self.labels.contains_key(&image_id) {
            return Err(Error::Config(format!("duplicate label for image '{image_id}'")));
        }
        self.geometry.insert(image_id.clone(), LabelGeometry::new(&label, self.connectivity));
        self.labels.insert(image_id, label);
        Ok(())
    }

    pub fn add_log(&mut self, log: ClickLog) -> Result<()> {
        log.validate()?;
        let label = self.labels.get(&log.image_id).ok_or_else(|| {
            Error::StudyMismatch(format!("log references unknown image '{}'", log.image_id))
        })?;
        if log.dice.len() < 2 {
            return Err(Error::Config(format!(
                "log {}/{} has a dice curve of length {}; need the baseline plus >= 1 iteration",
                log.user_id,
                log.image_id,
                log.dice.len()
            )));
        }
        for c in &log.clicks {
            if !label.dims().contains(c.voxel) {
                return Err(Error::OutOfBounds(c.voxel, label.dims()));
            }
        }
        let per_user = self.logs.entry(log.user_id.clone()).or_default();
        if per_user.contains_key(&log.image_id) {
            return Err(Error::Config(format!(
                "duplicate log for image '{}' and user '{}'",
                log.image_id, log.user_id
            )));
        }
        per_user.insert(log.image_id.clone(), log);
        Ok(())
    }

    pub fn connectivity(&self) -> Connectivity {
        self.connectivity
    }

    pub fn user_ids(&self) -> Vec<String> {
        self.logs.keys().cloned().collect()
    }

    pub fn user_kind(&self, user_id: &str) -> Option<crate::robots::UserKind> {
        self.logs.get(user_id).and_then(|m| m.values().next()).map(|log| log.user_kind)
    }

    pub fn image_count(&self, user_id: &str) -> usize {
        self.logs.get(user_id).map(|m| m.len()).unwrap_or(0)
    }

    fn user_logs(&self, user_id: &str) -> Result<&BTreeMap<String, ClickLog>> {
        self.logs
            .get(user_id)
            .ok_or_else(|| Error::StudyMismatch(format!("no logs for user '{user_id}'")))
    }

    fn lesion_clicks<'a>(&self, log: &'a ClickLog) -> Vec<&'a crate::robots::Click> {
        log.clicks_of_class(ClickClass::Lesion).collect()
    }
}

/// Percentage of lesion clicks that land inside the label, averaged per
/// image first. Images without lesion clicks are skipped; a user with no
/// lesion clicks at all is an error.
pub fn m1_label_conformity(set: &StudySet, user_id: &str) -> Result<f64> {
    let logs = set.user_logs(user_id)?;
    let mut per_image = Vec::new();
    for (image_id, log) in logs {
        let label = &set.labels[image_id];
        let clicks = set.lesion_clicks(log);
        if clicks.is_empty() {
            continue;
        }
        let conforming = clicks.iter().filter(|c| label.get(c.voxel) == 1).count();
        per_image.push(conforming as f64 / clicks.len() as f64);
    }
    if per_image.is_empty() {
        return Err(Error::Undefined(format!("user '{user_id}' has no lesion clicks")));
    }
    Ok(100.0 * per_image.iter().sum::<f64>() / per_image.len() as f64)
}

/// Centerness of conforming lesion clicks: `bound / (bound + cent_dist)`,
/// averaged per image then over images. Boundary clicks score 0, center
/// clicks 1. `None` when no image has a conforming click.
pub fn m2_centerness(set: &StudySet, user_id: &str) -> Result<Option<f64>> {
    let logs = set.user_logs(user_id)?;
    let mut per_image = Vec::new();
    for (image_id, log) in logs {
        let label = &set.labels[image_id];
        let geo = &set.geometry[image_id];
        let mut terms = Vec::new();
        for c in set.lesion_clicks(log) {
            if label.get(c.voxel) == 0 {
                continue;
            }
            let b_sq = geo.boundary.iter().map(|&b| c.voxel.dist_sq(b)).min().unwrap();
            let comp_id = geo.component_of[label.dims().index(c.voxel)];
            let center = geo.centers[comp_id as usize - 1];
            let b = (b_sq as f64).sqrt();
            let cd = c.voxel.dist(center);
            // A single-voxel component is both boundary and center; score
            // it with the boundary convention.
            let term = if b == 0.0 { 0.0 } else { b / (b + cd) };
            terms.push(term);
        }
        if !terms.is_empty() {
            per_image.push(terms.iter().sum::<f64>() / terms.len() as f64);
        }
    }
    if per_image.is_empty() {
        return Ok(None);
    }
    Ok(Some(100.0 * per_image.iter().sum::<f64>() / per_image.len() as f64))
}

/// How widely lesion clicks spread over the label components, relative to
/// what the click count could reach: `touched / min(components, clicks)`.
pub fn m3_click_diversity(set: &StudySet, user_id: &str) -> Result<f64> {
    let logs = set.user_logs(user_id)?;
    let mut per_image = Vec::new();
    for (image_id, log) in logs {
        let label = &set.labels[image_id];
        let geo = &set.geometry[image_id];
        let clicks = set.lesion_clicks(log);
        let denom = geo.components.len().min(clicks.len());
        if denom == 0 {
            continue;
        }
        let mut touched: Vec<u32> = clicks
            .iter()
            .map(|c| geo.component_of[label.dims().index(c.voxel)])
            .filter(|&id| id != 0)
            .collect();
        touched.sort_unstable();
        touched.dedup();
        per_image.push(touched.len() as f64 / denom as f64);
    }
    if per_image.is_empty() {
        return Err(Error::Undefined(format!(
            "click diversity needs at least one image with components and clicks for '{user_id}'"
        )));
    }
    Ok(100.0 * per_image.iter().sum::<f64>() / per_image.len() as f64)
}

/// Mean inverse distance of non-conforming lesion clicks to the label,
/// averaged per image. A fully conforming image contributes 100: every
/// click sits at distance zero, the proximal limit. Images with an empty
/// label are excluded.
pub fn m4_label_proximity(set: &StudySet, user_id: &str) -> Result<f64> {
    let logs = set.user_logs(user_id)?;
    let mut per_image = Vec::new();
    for (image_id, log) in logs {
        let label = &set.labels[image_id];
        if label.is_mask_empty() {
            continue;
        }
        let mut terms = Vec::new();
        for c in set.lesion_clicks(log) {
            if label.get(c.voxel) == 1 {
                continue;
            }
            let d = dist_to_mask(c.voxel, label)?;
            terms.push(1.0 / d);
        }
        if terms.is_empty() {
            per_image.push(1.0);
        } else {
            per_image.push(terms.iter().sum::<f64>() / terms.len() as f64);
        }
    }
    if per_image.is_empty() {
        return Err(Error::Undefined(format!(
            "label proximity needs at least one non-empty label for '{user_id}'"
        )));
    }
    Ok(100.0 * per_image.iter().sum::<f64>() / per_image.len() as f64)
}

/// Percentage of iterations whose Dice strictly improves on the previous
/// one, averaged per image. The curve's first entry is the pre-click
/// baseline.
pub fn m5_consistent_improvement(set: &StudySet, user_id: &str) -> Result<f64> {
    let logs = set.user_logs(user_id)?;
    let mut per_image = Vec::new();
    for log in logs.values() {
        let steps = log.dice.len() - 1;
        let improving = log.dice.windows(2).filter(|w| w[1] > w[0]).count();
        per_image.push(improving as f64 / steps as f64);
    }
    if per_image.is_empty() {
        return Err(Error::Undefined(format!("user '{user_id}' has no logs")));
    }
    Ok(100.0 * per_image.iter().sum::<f64>() / per_image.len() as f64)
}

/// All five behaviour metrics for one user.
pub fn metrics_vector(set: &StudySet, user_id: &str) -> Result<MetricsVector> {
    Ok(MetricsVector {
        m1: m1_label_conformity(set, user_id)?,
        m2: m2_centerness(set, user_id)?,
        m3: m3_click_diversity(set, user_id)?,
        m4: m4_label_proximity(set, user_id)?,
        m5: m5_consistent_improvement(set, user_id)?,
    })
}

/// User shift: mean absolute difference across the five behaviour metrics
/// between a robot and each annotator, on the percentage scale.
pub fn m6_user_shift(robot: &MetricsVector, annotators: &[MetricsVector]) -> Result<f64> {
    if annotators.is_empty() {
        return Err(Error::StudyMismatch("user shift needs at least one annotator".into()));
    }
    let r = robot.values()?;
    let mut total = 0.0;
    for a in annotators {
        let a = a.values()?;
        total += r.iter().zip(a.iter()).map(|(x, y)| (x - y).abs()).sum::<f64>();
    }
    Ok(total / (annotators.len() as f64 * 5.0))
}

/// Dice difference: mean absolute per-iteration Dice gap between the robot
/// and each annotator over the shared images, as a percentage.
pub fn m7_dice_difference(set: &StudySet, robot_id: &str, annotator_ids: &[String]) -> Result<f64> {
    let robot_logs = set.user_logs(robot_id)?;
    let mut missing = Vec::new();
    let mut total = 0.0;
    let mut count = 0usize;
    for annotator in annotator_ids {
        let ann_logs = set.user_logs(annotator)?;
        for image_id in robot_logs.keys() {
            if !ann_logs.contains_key(image_id) {
                missing.push(format!("annotator '{annotator}' lacks image '{image_id}'"));
            }
        }
        for image_id in ann_logs.keys() {
            if !robot_logs.contains_key(image_id) {
                missing.push(format!("robot '{robot_id}' lacks image '{image_id}'"));
            }
        }
        if !missing.is_empty() {
            continue;
        }
        for (image_id, ann_log) in ann_logs {
            let robot_log = &robot_logs[image_id];
            if robot_log.dice.len() != ann_log.dice.len() {
                return Err(Error::StudyMismatch(format!(
                    "iteration count differs on image '{image_id}': robot {} vs annotator {}",
                    robot_log.dice.len() - 1,
                    ann_log.dice.len() - 1
                )));
            }
            for i in 1..ann_log.dice.len() {
                total += (ann_log.dice[i] - robot_log.dice[i]).abs();
                count += 1;
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::StudyMismatch(missing.join("; ")));
    }
    if count == 0 {
        return Err(Error::Undefined("dice difference over zero iterations".into()));
    }
    Ok(100.0 * total / count as f64)
}

/// Pearson correlation coefficient of two equal-length series.
pub fn pearson_correlation(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::Config(format!(
            "correlation inputs differ in length: {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::Undefined("correlation needs at least two points".into()));
    }
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (x, y) in xs.iter().zip(ys.iter()) {
        cov += (x - mean_x) * (y - mean_y);
        var_x += (x - mean_x).powi(2);
        var_y += (y - mean_y).powi(2);
    }
    if var_x == 0.0 || var_y == 0.0 {
        return Err(Error::Undefined("correlation undefined under zero variance".into()));
    }
    Ok(cov / (var_x * var_y).sqrt())
}
