//! The interactive-model abstraction consumed by the click policies, plus
//! the mock predictors used for simulation and offline replay.
//!
//! A predictor maps (image, clicks so far) to a segmentation mask and,
//! optionally, a voxelwise uncertainty map. Real networks live behind this
//! trait out of process; the mocks here give controllable, deterministic
//! behaviour for exercising the policies and metrics.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::morphology::{boundary_set, connected_components, distance_to_sites_squared, Connectivity};
use crate::robots::Click;
use crate::sampling::ClickClass;
use crate::volume::{BinaryVolume, ScalarVolume, Voxel};

/// Behavioural contract for interactive segmentation backends.
///
/// `predict` must be deterministic given (image, clicks, config, seed) and
/// return a mask with the image's dims. `uncertainty` returns `None` when
/// the backend cannot produce a map.
pub trait Predictor {
    fn predict(&mut self, image: &ScalarVolume, clicks: &[Click]) -> Result<BinaryVolume>;

    fn uncertainty(&mut self, _image: &ScalarVolume, _clicks: &[Click]) -> Result<Option<ScalarVolume>> {
        Ok(None)
    }
}

/// Predicts the empty mask regardless of input. Uncertainty is unsupported.
#[derive(Debug, Default, Clone)]
pub struct NullPredictor;

impl Predictor for NullPredictor {
    fn predict(&mut self, image: &ScalarVolume, _clicks: &[Click]) -> Result<BinaryVolume> {
        let mut mask = BinaryVolume::zeros(image.dims());
        mask.set_spacing(image.spacing());
        Ok(mask)
    }
}

/// Configuration for the label-aware mock predictor.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct OracleGrowConfig {
    /// Radius revealed around clicks per elapsed iteration, in voxels.
    pub reveal_radius: u32,
    /// Erosion/dilation rounds applied with a seeded coin flip; 0 disables.
    pub noise: u32,
    pub seed: u64,
}

impl OracleGrowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.reveal_radius == 0 {
            return Err(Error::Config("oracle_grow reveal_radius must be >= 1".into()));
        }
        Ok(())
    }
}

/// Test-only predictor that knows the ground truth and reveals it
/// progressively around lesion clicks.
///
/// After k click iterations, the prediction is the union of the clicked
/// label components restricted to voxels within `reveal_radius * k` of any
/// lesion click, minus components hit by a background click, then eroded or
/// dilated `noise` times (seeded coin flip). With zero noise the prediction
/// is a subset of the label and the Dice curve is non-decreasing under
/// accumulating clicks.
pub struct OracleGrowPredictor {
    label: BinaryVolume,
    cfg: OracleGrowConfig,
    component_id: Vec<u32>,
    component_voxels: Vec<Vec<Voxel>>,
}

impl OracleGrowPredictor {
    pub fn new(label: BinaryVolume, cfg: OracleGrowConfig) -> Result<Self> {
        cfg.validate()?;
        let comps = connected_components(&label, Connectivity::TwentySix);
        let mut component_id = vec![0u32; label.dims().len()];
        let mut component_voxels = Vec::with_capacity(comps.len());
        for comp in &comps {
            for &v in comp.voxels() {
                component_id[label.dims().index(v)] = comp.id();
            }
            component_voxels.push(comp.voxels().to_vec());
        }
        Ok(OracleGrowPredictor { label, cfg, component_id, component_voxels })
    }

    fn reveal(&self, clicks: &[Click]) -> BinaryVolume {
        let dims = self.label.dims();
        let mut pred = BinaryVolume::zeros(dims);
        pred.set_spacing(self.label.spacing());
        if clicks.is_empty() {
            return pred;
        }
        let lesion: Vec<Voxel> =
            clicks.iter().filter(|c| c.class == ClickClass::Lesion).map(|c| c.voxel).collect();
        if lesion.is_empty() {
            return pred;
        }
        let k = clicks.iter().map(|c| c.iteration).max().unwrap_or(0) as u64;
        let radius_sq = (self.cfg.reveal_radius as u64 * k).pow(2);

        let mut selected: Vec<u32> = lesion
            .iter()
            .filter(|&&v| self.label.get(v) == 1)
            .map(|&v| self.component_id[dims.index(v)])
            .collect();
        selected.sort_unstable();
        selected.dedup();
        let blocked: Vec<u32> = clicks
            .iter()
            .filter(|c| c.class == ClickClass::Background && self.label.get(c.voxel) == 1)
            .map(|c| self.component_id[dims.index(c.voxel)])
            .collect();

        for &id in &selected {
            if blocked.contains(&id) {
                continue;
            }
            for &v in &self.component_voxels[id as usize - 1] {
                let near = lesion.iter().any(|&c| v.dist_sq(c) <= radius_sq);
                if near {
                    pred.set(v, true);
                }
            }
        }
        pred
    }

    fn apply_noise(&self, pred: BinaryVolume, clicks: &[Click]) -> BinaryVolume {
        if self.cfg.noise == 0 || pred.is_mask_empty() {
            return pred;
        }
        // The coin depends only on call-identifying state so identical
        // inputs reproduce identical output.
        let k = clicks.iter().map(|c| c.iteration).max().unwrap_or(0) as u64;
        let mut rng =
            ChaCha8Rng::seed_from_u64(self.cfg.seed ^ (k << 32) ^ clicks.len() as u64);
        let dilate: bool = rng.gen();
        let mut out = pred;
        for _ in 0..self.cfg.noise {
            out = morph_step(&out, dilate);
        }
        out
    }
}

/// One round of 6-connectivity dilation or erosion; the volume border acts
/// as background for erosion.
fn morph_step(mask: &BinaryVolume, dilate: bool) -> BinaryVolume {
    let dims = mask.dims();
    let mut out = BinaryVolume::zeros(dims);
    out.set_spacing(mask.spacing());
    let neighbors = [(-1i64, 0i64, 0i64), (1, 0, 0), (0, -1, 0), (0, 1, 0), (0, 0, -1), (0, 0, 1)];
    for idx in 0..dims.len() {
        let v = dims.voxel(idx);
        let mut any_fg = mask.data()[idx] == 1;
        let mut all_fg = mask.data()[idx] == 1;
        for (dx, dy, dz) in neighbors {
            let (nx, ny, nz) = (v.x as i64 + dx, v.y as i64 + dy, v.z as i64 + dz);
            let inside = nx >= 0
                && ny >= 0
                && nz >= 0
                && (nx as usize) < dims.w
                && (ny as usize) < dims.h
                && (nz as usize) < dims.d;
            let fg = inside && mask.get(Voxel::new(nx as u32, ny as u32, nz as u32)) == 1;
            any_fg |= fg;
            all_fg &= fg;
        }
        out.data_mut()[idx] = if dilate { any_fg as u8 } else { all_fg as u8 };
    }
    out
}

impl Predictor for OracleGrowPredictor {
    fn predict(&mut self, image: &ScalarVolume, clicks: &[Click]) -> Result<BinaryVolume> {
        if image.dims() != self.label.dims() {
            return Err(Error::DimMismatch(image.dims(), self.label.dims()));
        }
        let pred = self.reveal(clicks);
        Ok(self.apply_noise(pred, clicks))
    }

    fn uncertainty(&mut self, image: &ScalarVolume, clicks: &[Click]) -> Result<Option<ScalarVolume>> {
        let pred = self.predict(image, clicks)?;
        Ok(Some(boundary_peaked_uncertainty(&pred)))
    }
}

/// Uncertainty surrogate: `exp(-distance to the prediction boundary)`,
/// min-max normalized to `[0, 1]`; all-zero for an empty prediction.
///
/// Segmentation uncertainty concentrates at mask boundaries, so this gives
/// uncertainty-driven policies a non-degenerate target.
pub fn boundary_peaked_uncertainty(pred: &BinaryVolume) -> ScalarVolume {
    let dims = pred.dims();
    let mut out = ScalarVolume::zeros(dims);
    out.set_spacing(pred.spacing());
    let boundary = boundary_set(pred);
    if boundary.is_empty() {
        return out;
    }
    let sq = distance_to_sites_squared(dims, &boundary).expect("non-empty boundary");
    let values: Vec<f64> = sq.iter().map(|&s| (-(s as f64).sqrt()).exp()).collect();
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max > min {
        let range = max - min;
        for (o, &v) in out.data_mut().iter_mut().zip(values.iter()) {
            *o = ((v - min) / range) as f32;
        }
    }
    out
}

/// BinaryVolume mask stored for `iteration` in a recorded session directory
/// (`pred_000.bin` .. `pred_NNN.bin`, native volume format).
pub fn replay_predict(session_dir: &Path, iteration: u32) -> Result<BinaryVolume> {
    let path = session_dir.join(format!("pred_{iteration:03}.bin"));
    if !path.exists() {
        return Err(Error::MissingFile(path));
    }
    match crate::io::read_volume(&path)? {
        crate::io::Volume::Binary(mask) => Ok(mask),
        crate::io::Volume::Scalar(_) => Err(Error::Format(format!(
            "{}: expected a binary mask, found scalar data",
            path.display()
        ))),
    }
}

/// Serves stored per-iteration masks as predictions, keyed by the highest
/// iteration index present in the clicks.
pub struct ReplayPredictor {
    session_dir: PathBuf,
}

impl ReplayPredictor {
    pub fn new(session_dir: impl Into<PathBuf>) -> Self {
        ReplayPredictor { session_dir: session_dir.into() }
    }
}

impl Predictor for ReplayPredictor {
    fn predict(&mut self, _image: &ScalarVolume, clicks: &[Click]) -> Result<BinaryVolume> {
        let iteration = clicks.iter().map(|c| c.iteration).max().unwrap_or(0);
        replay_predict(&self.session_dir, iteration)
    }
}
