//! Deterministic synthetic PET phantoms: ellipsoidal lesions on a noisy
//! background, plus optional unannotated hotspots that give uptake-driven
//! click policies a target outside the label.
//!
//! Axis-aligned ellipsoids with integer centers and radii keep membership
//! tests exact, so every generated label can be checked analytically.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{BinaryVolume, Dims, ScalarVolume, Spacing, Voxel};

fn default_spacing() -> [f32; 3] {
    [1.0, 1.0, 1.0]
}

fn default_hotspots() -> u32 {
    0
}

/// Specification of one phantom volume.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub id: String,
    pub dims: [u32; 3],
    #[serde(default = "default_spacing")]
    pub spacing: [f32; 3],
    /// Number of annotated lesions, >= 1.
    pub lesions: u32,
    /// Inclusive per-axis radius range in voxels.
    pub radius_range: [u32; 2],
    /// Inclusive uptake range for lesions.
    pub lesion_suv_range: [f32; 2],
    pub background_mean: f32,
    pub background_sigma: f32,
    /// Unannotated high-uptake regions, disjoint from all lesions.
    #[serde(default = "default_hotspots")]
    pub hotspots: u32,
    /// Hotspot radius range; defaults to `radius_range`.
    #[serde(default)]
    pub hotspot_radius_range: Option<[u32; 2]>,
    /// Hotspot uptake range; defaults to `lesion_suv_range`.
    #[serde(default)]
    pub hotspot_suv_range: Option<[f32; 2]>,
    pub seed: u64,
}

impl PhantomSpec {
    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let spec: PhantomSpec = serde_json::from_slice(bytes)
            .map_err(|e| Error::json("phantom spec", e))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty()
            || !self.id.chars().all(|c| c.is_ascii_alphanumeric() || "._-".contains(c))
        {
            return Err(Error::Config(format!(
                "phantom id '{}' must be non-empty and contain only [A-Za-z0-9._-]",
                self.id
            )));
        }
        if self.dims.iter().any(|&d| d == 0) {
            return Err(Error::Config("phantom dims must be positive".into()));
        }
        if self.spacing.iter().any(|&s| !s.is_finite() || s <= 0.0) {
            return Err(Error::Config("phantom spacing must be strictly positive".into()));
        }
        if self.lesions == 0 {
            return Err(Error::Config("phantom needs at least one lesion".into()));
        }
        for (name, range) in [
            ("radius_range", self.radius_range),
            ("hotspot_radius_range", self.hotspot_radius_range.unwrap_or(self.radius_range)),
        ] {
            if range[0] == 0 || range[0] > range[1] {
                return Err(Error::Config(format!(
                    "{name} [{}, {}] must satisfy 1 <= lo <= hi",
                    range[0], range[1]
                )));
            }
        }
        for (name, range) in [
            ("lesion_suv_range", self.lesion_suv_range),
            ("hotspot_suv_range", self.hotspot_suv_range.unwrap_or(self.lesion_suv_range)),
        ] {
            if !range.iter().all(|v| v.is_finite()) || range[0] > range[1] {
                return Err(Error::Config(format!("{name} must be a finite lo <= hi pair")));
            }
            if range[0] <= self.background_mean {
                return Err(Error::Config(format!(
                    "{name} low end {} must exceed the background mean {}",
                    range[0], self.background_mean
                )));
            }
        }
        if !self.background_mean.is_finite() || self.background_mean < 0.0 {
            return Err(Error::Config("background_mean must be finite and >= 0".into()));
        }
        if !self.background_sigma.is_finite() || self.background_sigma < 0.0 {
            return Err(Error::Config("background_sigma must be finite and >= 0".into()));
        }
        Ok(())
    }

    fn volume_dims(&self) -> Dims {
        Dims::new(self.dims[0] as usize, self.dims[1] as usize, self.dims[2] as usize)
    }
}

/// What a generated object is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectKind {
    Lesion,
    Hotspot,
}

/// One placed ellipsoid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlacedObject {
    pub kind: ObjectKind,
    pub center: [u32; 3],
    pub radii: [u32; 3],
    pub suv: f32,
}

impl PlacedObject {
    /// Exact integer membership test for the axis-aligned ellipsoid.
    pub fn contains(&self, v: Voxel) -> bool {
        let dx = v.x as i64 - self.center[0] as i64;
        let dy = v.y as i64 - self.center[1] as i64;
        let dz = v.z as i64 - self.center[2] as i64;
        let (rx, ry, rz) = (self.radii[0] as i64, self.radii[1] as i64, self.radii[2] as i64);
        // (dx/rx)^2 + (dy/ry)^2 + (dz/rz)^2 <= 1, cross-multiplied.
        let term_x = dx * dx * (ry * ry) * (rz * rz);
        let term_y = dy * dy * (rx * rx) * (rz * rz);
        let term_z = dz * dz * (rx * rx) * (ry * ry);
        term_x + term_y + term_z <= (rx * rx) * (ry * ry) * (rz * rz)
    }

    fn voxels(&self, dims: Dims) -> Vec<Voxel> {
        let mut out = Vec::new();
        let lo = |c: u32, r: u32| c.saturating_sub(r);
        let hi = |c: u32, r: u32, d: usize| ((c + r) as usize).min(d - 1) as u32;
        for z in lo(self.center[2], self.radii[2])..=hi(self.center[2], self.radii[2], dims.d) {
            for y in lo(self.center[1], self.radii[1])..=hi(self.center[1], self.radii[1], dims.h) {
                for x in
                    lo(self.center[0], self.radii[0])..=hi(self.center[0], self.radii[0], dims.w)
                {
                    let v = Voxel::new(x, y, z);
                    if self.contains(v) {
                        out.push(v);
                    }
                }
            }
        }
        out
    }
}

/// Everything that was placed, written beside the volumes as JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhantomManifest {
    pub version: u32,
    pub id: String,
    pub seed: u64,
    pub dims: [u32; 3],
    pub spacing: [f32; 3],
    pub objects: Vec<PlacedObject>,
}

impl PhantomManifest {
    pub fn lesions(&self) -> impl Iterator<Item = &PlacedObject> {
        self.objects.iter().filter(|o| o.kind == ObjectKind::Lesion)
    }

    pub fn hotspots(&self) -> impl Iterator<Item = &PlacedObject> {
        self.objects.iter().filter(|o| o.kind == ObjectKind::Hotspot)
    }
}

const ATTEMPTS_PER_OBJECT: u32 = 1000;

/// Generates the SUV image, the lesion label, and the placement manifest.
///
/// Placement is rejection sampling: each ellipsoid must be fully interior
/// (one-voxel background margin) and must not touch any previously placed
/// object, including diagonally, so the label's component count equals the
/// lesion count. Identical spec and seed reproduce identical volumes.
pub fn generate(spec: &PhantomSpec) -> Result<(ScalarVolume, BinaryVolume, PhantomManifest)> {
    spec.validate()?;
    let dims = spec.volume_dims();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // Occupancy dilated by one voxel in Chebyshev distance keeps objects
    // from becoming 26-adjacent.
    let mut occupied = vec![false; dims.len()];
    let mut objects: Vec<PlacedObject> = Vec::new();
    let total = spec.lesions + spec.hotspots;
    let budget = ATTEMPTS_PER_OBJECT * total;
    let mut attempts = 0u32;

    for index in 0..total {
        let kind = if index < spec.lesions { ObjectKind::Lesion } else { ObjectKind::Hotspot };
        let radius_range = match kind {
            ObjectKind::Lesion => spec.radius_range,
            ObjectKind::Hotspot => spec.hotspot_radius_range.unwrap_or(spec.radius_range),
        };
        let suv_range = match kind {
            ObjectKind::Lesion => spec.lesion_suv_range,
            ObjectKind::Hotspot => spec.hotspot_suv_range.unwrap_or(spec.lesion_suv_range),
        };
        loop {
            attempts += 1;
            if attempts > budget {
                return Err(Error::PlacementBudget { attempts });
            }
            let radii = [
                rng.gen_range(radius_range[0]..=radius_range[1]),
                rng.gen_range(radius_range[0]..=radius_range[1]),
                rng.gen_range(radius_range[0]..=radius_range[1]),
            ];
            // Fully interior: extent plus the one-voxel margin must fit.
            let fits = |r: u32, d: usize| (2 * r + 3) as usize <= d;
            if !fits(radii[0], dims.w) || !fits(radii[1], dims.h) || !fits(radii[2], dims.d) {
                continue;
            }
            let center = [
                rng.gen_range(radii[0] + 1..=(dims.w as u32 - radii[0] - 2)),
                rng.gen_range(radii[1] + 1..=(dims.h as u32 - radii[1] - 2)),
                rng.gen_range(radii[2] + 1..=(dims.d as u32 - radii[2] - 2)),
            ];
            let suv = if suv_range[0] == suv_range[1] {
                suv_range[0]
            } else {
                rng.gen_range(suv_range[0]..=suv_range[1])
            };
            let candidate = PlacedObject { kind, center, radii, suv };
            let voxels = candidate.voxels(dims);
            if voxels.iter().any(|&v| occupied[dims.index(v)]) {
                continue;
            }
            // Mark the object plus a one-voxel halo.
            for &v in &voxels {
                for dz in -1i64..=1 {
                    for dy in -1i64..=1 {
                        for dx in -1i64..=1 {
                            let (x, y, z) =
                                (v.x as i64 + dx, v.y as i64 + dy, v.z as i64 + dz);
                            if x >= 0
                                && y >= 0
                                && z >= 0
                                && (x as usize) < dims.w
                                && (y as usize) < dims.h
                                && (z as usize) < dims.d
                            {
                                occupied[dims.index(Voxel::new(x as u32, y as u32, z as u32))] =
                                    true;
                            }
                        }
                    }
                }
            }
            objects.push(candidate);
            break;
        }
    }

    // Background noise in a fixed voxel order, then flat object uptake.
    let spacing = Spacing::new(spec.spacing[0], spec.spacing[1], spec.spacing[2]);
    let mut image_data = vec![0.0f32; dims.len()];
    if spec.background_sigma > 0.0 {
        let normal = Normal::new(spec.background_mean as f64, spec.background_sigma as f64)
            .map_err(|e| Error::Config(format!("background noise: {e}")))?;
        for v in image_data.iter_mut() {
            *v = (normal.sample(&mut rng) as f32).max(0.0);
        }
    } else {
        image_data.fill(spec.background_mean);
    }
    let mut label = BinaryVolume::zeros(dims);
    label.set_spacing(spacing);
    for object in &objects {
        for v in object.voxels(dims) {
            image_data[dims.index(v)] = object.suv;
            if object.kind == ObjectKind::Lesion {
                label.set(v, true);
            }
        }
    }
    let image = ScalarVolume::new(dims, spacing, image_data)?;

    let manifest = PhantomManifest {
        version: 1,
        id: spec.id.clone(),
        seed: spec.seed,
        dims: spec.dims,
        spacing: spec.spacing,
        objects,
    };
    Ok((image, label, manifest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::morphology::{connected_components, Connectivity};
    use crate::sampling::suv_weights;

    fn base_spec() -> PhantomSpec {
        PhantomSpec {
            id: "ph".into(),
            dims: [32, 32, 32],
            spacing: [2.0, 2.0, 3.0],
            lesions: 1,
            radius_range: [2, 4],
            lesion_suv_range: [5.0, 8.0],
            background_mean: 0.5,
            background_sigma: 0.1,
            hotspots: 0,
            hotspot_radius_range: None,
            hotspot_suv_range: None,
            seed: 7,
        }
    }

    #[test]
    fn single_lesion_no_noise_peaks_inside_label() {
        let mut spec = base_spec();
        spec.background_sigma = 0.0;
        let (image, label, manifest) = generate(&spec).unwrap();
        let comps = connected_components(&label, Connectivity::TwentySix);
        assert_eq!(comps.len(), 1);
        let max_idx = image
            .data()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(label.data()[max_idx], 1);
        assert_eq!(manifest.lesions().count(), 1);
    }

    #[test]
    fn component_count_matches_lesion_count() {
        let mut spec = base_spec();
        spec.lesions = 3;
        spec.dims = [48, 48, 48];
        let (_, label, manifest) = generate(&spec).unwrap();
        let comps = connected_components(&label, Connectivity::TwentySix);
        assert_eq!(comps.len(), 3);
        assert_eq!(manifest.lesions().count(), 3);
        // Each manifest lesion matches exactly one component's voxel set.
        let total: usize = comps.iter().map(|c| c.size()).sum();
        assert_eq!(total, label.count());
    }

    #[test]
    fn hotspots_sit_outside_label_and_carry_weight() {
        let mut spec = base_spec();
        spec.hotspots = 2;
        spec.dims = [40, 40, 40];
        spec.background_sigma = 0.0;
        let (image, label, manifest) = generate(&spec).unwrap();
        let weights = suv_weights(&image, &label).unwrap();
        assert_eq!(manifest.hotspots().count(), 2);
        for hotspot in manifest.hotspots() {
            let center =
                Voxel::new(hotspot.center[0], hotspot.center[1], hotspot.center[2]);
            assert_eq!(label.get(center), 0);
            let w = weights.get(center);
            assert!(w > 0.0);
            // Weak local maximum over the 26-neighbourhood.
            for dz in -1i64..=1 {
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let n = Voxel::new(
                            (center.x as i64 + dx) as u32,
                            (center.y as i64 + dy) as u32,
                            (center.z as i64 + dz) as u32,
                        );
                        assert!(weights.get(n) <= w);
                    }
                }
            }
        }
    }

    #[test]
    fn identical_spec_reproduces_bit_identical_volumes() {
        let mut spec = base_spec();
        spec.lesions = 2;
        spec.hotspots = 1;
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a.0.data(), b.0.data());
        assert_eq!(a.1.data(), b.1.data());
        assert_eq!(a.2.objects.len(), b.2.objects.len());
    }

    #[test]
    fn impossible_placement_exhausts_budget() {
        let mut spec = base_spec();
        spec.dims = [12, 12, 12];
        spec.lesions = 40;
        spec.radius_range = [3, 3];
        let err = generate(&spec).unwrap_err();
        assert!(matches!(err, Error::PlacementBudget { .. }));
    }

    #[test]
    fn lesions_never_touch_volume_border() {
        let mut spec = base_spec();
        spec.lesions = 4;
        spec.dims = [40, 40, 40];
        let (_, label, _) = generate(&spec).unwrap();
        let dims = label.dims();
        for v in label.foreground() {
            assert!(v.x >= 1 && v.y >= 1 && v.z >= 1);
            assert!(
                (v.x as usize) < dims.w - 1
                    && (v.y as usize) < dims.h - 1
                    && (v.z as usize) < dims.d - 1
            );
        }
    }

    #[test]
    fn suv_must_exceed_background() {
        let mut spec = base_spec();
        spec.lesion_suv_range = [0.4, 0.6];
        assert!(generate(&spec).is_err());
    }
}
