//! Seeded voxel sampling: uniform over mask support, weighted by a scalar
//! map, uptake-outside-label weight construction, and bounded click
//! perturbation.
//!
//! Reproducibility contract: one [`RngStream`] per (image, user, class)
//! task, derived by hashing the master seed together with the task ids.
//! ChaCha8 has a documented, platform-stable byte stream, so identical
//! seeds and ids replay identical voxel sequences on any host.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::volume::{BinaryVolume, Dims, ScalarVolume, Voxel};

/// The click class a sampling stream serves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClickClass {
    Lesion,
    Background,
}

impl ClickClass {
    pub fn as_byte(self) -> u8 {
        match self {
            ClickClass::Lesion => 0,
            ClickClass::Background => 1,
        }
    }
}

/// A deterministic, single-consumer random stream.
///
/// Distinct streams are independent; a stream's draw sequence depends only
/// on its seed material, never on other streams or thread schedule.
#[derive(Debug, Clone)]
pub struct RngStream {
    rng: ChaCha8Rng,
}

impl RngStream {
    /// Stream keyed directly by a 64-bit seed.
    pub fn from_seed(seed: u64) -> Self {
        RngStream { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Stream for one (image, user, class) task.
    ///
    /// The ChaCha key is SHA-256 over the length-prefixed tuple
    /// `(master_seed, image_id, user_id, class_byte)`, so any change to any
    /// component yields an unrelated stream.
    pub fn for_task(master_seed: u64, image_id: &str, user_id: &str, class: ClickClass) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(master_seed.to_le_bytes());
        hasher.update((image_id.len() as u64).to_le_bytes());
        hasher.update(image_id.as_bytes());
        hasher.update((user_id.len() as u64).to_le_bytes());
        hasher.update(user_id.as_bytes());
        hasher.update([class.as_byte()]);
        let digest = hasher.finalize();
        let mut key = [0u8; 32];
        key.copy_from_slice(&digest);
        RngStream { rng: ChaCha8Rng::from_seed(key) }
    }

    pub fn gen_f64(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    fn gen_index(&mut self, n: usize) -> usize {
        self.rng.gen_range(0..n)
    }

    fn gen_offset(&mut self, a: i64) -> i64 {
        self.rng.gen_range(-a..=a)
    }
}

/// Uniform draw over the foreground voxels of `mask`.
pub fn sample_uniform(mask: &BinaryVolume, rng: &mut RngStream) -> Result<Voxel> {
    let support = mask.foreground();
    if support.is_empty() {
        return Err(Error::EmptySupport("uniform sample over empty mask"));
    }
    Ok(support[rng.gen_index(support.len())])
}

/// Draw voxel `v` with probability `weights[v] / sum(weights)`.
///
/// Weights must be non-negative with a positive sum; zero-weight voxels are
/// never returned.
pub fn sample_weighted(weights: &ScalarVolume, rng: &mut RngStream) -> Result<Voxel> {
    let dims = weights.dims();
    let mut total = 0.0f64;
    for (i, &w) in weights.data().iter().enumerate() {
        if w < 0.0 {
            return Err(Error::InvalidVolume(format!("negative sampling weight at index {i}")));
        }
        total += w as f64;
    }
    if total <= 0.0 {
        return Err(Error::EmptySupport("weighted sample over all-zero weights"));
    }
    let u = rng.gen_f64() * total;
    let mut acc = 0.0f64;
    let mut last_positive = None;
    for (i, &w) in weights.data().iter().enumerate() {
        if w > 0.0 {
            acc += w as f64;
            last_positive = Some(i);
            if u < acc {
                return Ok(dims.voxel(i));
            }
        }
    }
    // Rounding pushed u past the final cumulative sum.
    Ok(dims.voxel(last_positive.expect("positive total implies a positive weight")))
}

/// Sampling weights over high-uptake voxels outside the label.
///
/// The image is clamped at zero, min-max normalized over the whole volume,
/// and zeroed wherever the label is foreground. A constant image produces
/// all-zero weights; the caller decides whether that is an error.
pub fn suv_weights(image: &ScalarVolume, label: &BinaryVolume) -> Result<ScalarVolume> {
    if image.dims() != label.dims() {
        return Err(Error::DimMismatch(image.dims(), label.dims()));
    }
    let clamped: Vec<f32> = image.data().iter().map(|&v| v.max(0.0)).collect();
    let min = clamped.iter().copied().fold(f32::INFINITY, f32::min);
    let max = clamped.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let mut out = ScalarVolume::zeros(image.dims());
    out.set_spacing(image.spacing());
    if max > min {
        let range = max - min;
        for (i, o) in out.data_mut().iter_mut().enumerate() {
            if label.data()[i] == 0 {
                *o = (clamped[i] - min) / range;
            }
        }
    }
    Ok(out)
}

/// Displace `c` by a uniform draw from the integer cube `[-a, a]^3`, then
/// clamp each axis back into the volume.
///
/// Draw order is fixed (x, y, z); `a = 0` consumes no randomness.
pub fn perturb(c: Voxel, a: u32, dims: Dims, rng: &mut RngStream) -> Voxel {
    if a == 0 {
        return c;
    }
    let a = a as i64;
    let dx = rng.gen_offset(a);
    let dy = rng.gen_offset(a);
    let dz = rng.gen_offset(a);
    let clamp = |v: i64, dim: usize| -> u32 { v.clamp(0, dim as i64 - 1) as u32 };
    Voxel::new(
        clamp(c.x as i64 + dx, dims.w),
        clamp(c.y as i64 + dy, dims.h),
        clamp(c.z as i64 + dz, dims.d),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Spacing;

    #[test]
    fn same_task_replays_identically() {
        let mut a = RngStream::for_task(42, "img", "user", ClickClass::Lesion);
        let mut b = RngStream::for_task(42, "img", "user", ClickClass::Lesion);
        let xs: Vec<f64> = (0..16).map(|_| a.gen_f64()).collect();
        let ys: Vec<f64> = (0..16).map(|_| b.gen_f64()).collect();
        assert_eq!(xs, ys);
    }

    #[test]
    fn distinct_tasks_diverge() {
        let mut base = RngStream::for_task(42, "img", "user", ClickClass::Lesion);
        let mut other_class = RngStream::for_task(42, "img", "user", ClickClass::Background);
        let mut other_user = RngStream::for_task(42, "img", "user2", ClickClass::Lesion);
        let mut other_seed = RngStream::for_task(43, "img", "user", ClickClass::Lesion);
        let x = base.gen_f64();
        assert_ne!(x, other_class.gen_f64());
        assert_ne!(x, other_user.gen_f64());
        assert_ne!(x, other_seed.gen_f64());
    }

    #[test]
    fn singleton_support_always_returned() {
        let dims = Dims::new(4, 4, 4);
        let mask = BinaryVolume::from_voxels(dims, &[Voxel::new(2, 1, 3)]).unwrap();
        let mut rng = RngStream::from_seed(1);
        for _ in 0..20 {
            assert_eq!(sample_uniform(&mask, &mut rng).unwrap(), Voxel::new(2, 1, 3));
        }
    }

    #[test]
    fn empty_support_errors() {
        let mask = BinaryVolume::zeros(Dims::new(2, 2, 2));
        let mut rng = RngStream::from_seed(1);
        assert!(sample_uniform(&mask, &mut rng).is_err());
    }

    #[test]
    fn uniform_samples_stay_in_support() {
        let dims = Dims::new(6, 6, 6);
        let mask = BinaryVolume::from_voxels(
            dims,
            &[Voxel::new(0, 0, 0), Voxel::new(5, 5, 5), Voxel::new(2, 3, 4), Voxel::new(1, 1, 1)],
        )
        .unwrap();
        let mut rng = RngStream::from_seed(7);
        for _ in 0..200 {
            let v = sample_uniform(&mask, &mut rng).unwrap();
            assert_eq!(mask.get(v), 1);
        }
    }

    #[test]
    fn weighted_singleton_and_support_containment() {
        let dims = Dims::new(3, 3, 1);
        let mut weights = ScalarVolume::zeros(dims);
        weights.data_mut()[dims.index(Voxel::new(1, 2, 0))] = 0.25;
        let mut rng = RngStream::from_seed(3);
        for _ in 0..20 {
            assert_eq!(sample_weighted(&weights, &mut rng).unwrap(), Voxel::new(1, 2, 0));
        }
    }

    #[test]
    fn weighted_rejects_degenerate_weights() {
        let dims = Dims::new(2, 1, 1);
        let zeros = ScalarVolume::zeros(dims);
        let mut rng = RngStream::from_seed(3);
        assert!(sample_weighted(&zeros, &mut rng).is_err());
    }

    #[test]
    fn weighted_one_to_three_ratio() {
        let dims = Dims::new(2, 1, 1);
        let weights =
            ScalarVolume::new(dims, Spacing::isotropic(1.0), vec![1.0, 3.0]).unwrap();
        let mut rng = RngStream::from_seed(1234);
        let n = 10_000;
        let mut hits = 0usize;
        for _ in 0..n {
            if sample_weighted(&weights, &mut rng).unwrap() == Voxel::new(1, 0, 0) {
                hits += 1;
            }
        }
        let freq = hits as f64 / n as f64;
        assert!((freq - 0.75).abs() < 0.02, "hot-voxel frequency {freq}");
    }

    #[test]
    fn suv_weights_zero_for_constant_image() {
        let dims = Dims::new(3, 3, 3);
        let image =
            ScalarVolume::new(dims, Spacing::isotropic(1.0), vec![0.0; dims.len()]).unwrap();
        let label = BinaryVolume::zeros(dims);
        let w = suv_weights(&image, &label).unwrap();
        assert!(w.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn suv_weights_hot_voxel_outside_label() {
        let dims = Dims::new(3, 1, 1);
        let mut image = ScalarVolume::zeros(dims);
        image.data_mut()[1] = 10.0;
        let label = BinaryVolume::zeros(dims);
        let w = suv_weights(&image, &label).unwrap();
        assert_eq!(w.data(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn suv_weights_masked_inside_label() {
        let dims = Dims::new(3, 1, 1);
        let mut image = ScalarVolume::zeros(dims);
        image.data_mut()[1] = 10.0;
        let label = BinaryVolume::from_voxels(dims, &[Voxel::new(1, 0, 0)]).unwrap();
        let w = suv_weights(&image, &label).unwrap();
        assert_eq!(w.get(Voxel::new(1, 0, 0)), 0.0);
    }

    #[test]
    fn suv_weights_clamp_negative_values() {
        let dims = Dims::new(2, 1, 1);
        let image = ScalarVolume::new(dims, Spacing::isotropic(1.0), vec![-5.0, 2.0]).unwrap();
        let label = BinaryVolume::zeros(dims);
        let w = suv_weights(&image, &label).unwrap();
        assert_eq!(w.data(), &[0.0, 1.0]);
    }

    #[test]
    fn perturb_amplitude_zero_is_identity() {
        let dims = Dims::new(10, 10, 10);
        let mut rng = RngStream::from_seed(5);
        let c = Voxel::new(3, 4, 5);
        assert_eq!(perturb(c, 0, dims, &mut rng), c);
        // And consumes nothing: the next draw equals a fresh stream's first.
        let mut fresh = RngStream::from_seed(5);
        assert_eq!(rng.gen_f64(), fresh.gen_f64());
    }

    #[test]
    fn perturb_clamps_into_bounds() {
        let dims = Dims::new(10, 10, 10);
        let mut rng = RngStream::from_seed(8);
        for _ in 0..500 {
            let v = perturb(Voxel::new(0, 0, 0), 35, dims, &mut rng);
            assert!(dims.contains(v));
        }
    }

    #[test]
    fn weighted_uniform_weights_match_uniform_sampler_distribution() {
        // Same support, constant weights: both samplers should land within
        // loose frequency bounds of the uniform law.
        let dims = Dims::new(2, 2, 1);
        let mask = BinaryVolume::new(dims, Spacing::isotropic(1.0), vec![1; 4]).unwrap();
        let weights =
            ScalarVolume::new(dims, Spacing::isotropic(1.0), vec![0.5; 4]).unwrap();
        let mut rng_u = RngStream::from_seed(21);
        let mut rng_w = RngStream::from_seed(22);
        let n = 10_000;
        let mut cu = [0usize; 4];
        let mut cw = [0usize; 4];
        for _ in 0..n {
            cu[dims.index(sample_uniform(&mask, &mut rng_u).unwrap())] += 1;
            cw[dims.index(sample_weighted(&weights, &mut rng_w).unwrap())] += 1;
        }
        for i in 0..4 {
            assert!((cu[i] as f64 / n as f64 - 0.25).abs() < 0.02);
            assert!((cw[i] as f64 / n as f64 - 0.25).abs() < 0.02);
        }
    }
}
