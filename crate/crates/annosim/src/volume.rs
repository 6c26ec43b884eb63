//! 3D grid primitives: scalar and binary volumes, Dice score, error masks.
//!
//! All volumes are dense row-major grids with x varying fastest
//! (`index = x + w * (y + h * z)`). Spacing is carried in millimeters for
//! file-format fidelity; every distance in this crate is measured in
//! isotropic voxel units.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grid extent in voxels per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub w: usize,
    pub h: usize,
    pub d: usize,
}

impl Dims {
    pub fn new(w: usize, h: usize, d: usize) -> Self {
        Dims { w, h, d }
    }

    pub fn len(&self) -> usize {
        self.w * self.h * self.d
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, v: Voxel) -> bool {
        (v.x as usize) < self.w && (v.y as usize) < self.h && (v.z as usize) < self.d
    }

    /// Linear index of `v`; caller guarantees `contains(v)`.
    pub fn index(&self, v: Voxel) -> usize {
        v.x as usize + self.w * (v.y as usize + self.h * v.z as usize)
    }

    /// Inverse of [`Dims::index`].
    pub fn voxel(&self, index: usize) -> Voxel {
        let x = index % self.w;
        let y = (index / self.w) % self.h;
        let z = index / (self.w * self.h);
        Voxel::new(x as u32, y as u32, z as u32)
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.w, self.h, self.d)
    }
}

/// Physical voxel size in millimeters per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spacing {
    pub x: f32,
    pub y: f32,
    pub z: f32,
}

impl Spacing {
    pub fn new(x: f32, y: f32, z: f32) -> Self {
        Spacing { x, y, z }
    }

    pub fn isotropic(s: f32) -> Self {
        Spacing { x: s, y: s, z: s }
    }

    fn validate(&self) -> Result<()> {
        for (axis, s) in [("x", self.x), ("y", self.y), ("z", self.z)] {
            if !s.is_finite() || s <= 0.0 {
                return Err(Error::InvalidVolume(format!(
                    "spacing.{axis} must be finite and strictly positive, got {s}"
                )));
            }
        }
        Ok(())
    }
}

/// Integer voxel coordinate. Ordering is lexicographic on `(x, y, z)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Voxel {
    pub x: u32,
    pub y: u32,
    pub z: u32,
}

impl Voxel {
    pub fn new(x: u32, y: u32, z: u32) -> Self {
        Voxel { x, y, z }
    }

    /// Squared Euclidean distance to `other` in voxel units.
    pub fn dist_sq(&self, other: Voxel) -> u64 {
        let dx = self.x as i64 - other.x as i64;
        let dy = self.y as i64 - other.y as i64;
        let dz = self.z as i64 - other.z as i64;
        (dx * dx + dy * dy + dz * dz) as u64
    }

    pub fn dist(&self, other: Voxel) -> f64 {
        (self.dist_sq(other) as f64).sqrt()
    }
}

/// Dense 3D grid of finite scalar values (SUV images, distance maps, weights).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarVolume {
    dims: Dims,
    spacing: Spacing,
    data: Vec<f32>,
}

impl ScalarVolume {
    pub fn new(dims: Dims, spacing: Spacing, data: Vec<f32>) -> Result<Self> {
        if data.len() != dims.len() {
            return Err(Error::InvalidVolume(format!(
                "data length {} does not match dims {} ({} voxels)",
                data.len(),
                dims,
                dims.len()
            )));
        }
        spacing.validate()?;
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidVolume(format!(
                "non-finite value {} at index {i}",
                data[i]
            )));
        }
        Ok(ScalarVolume { dims, spacing, data })
    }

    /// All-zero volume with unit spacing.
    pub fn zeros(dims: Dims) -> Self {
        ScalarVolume { dims, spacing: Spacing::isotropic(1.0), data: vec![0.0; dims.len()] }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn set_spacing(&mut self, spacing: Spacing) {
        self.spacing = spacing;
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, v: Voxel) -> f32 {
        self.data[self.dims.index(v)]
    }

    /// Sets one voxel; the value must keep the all-finite invariant.
    pub fn set(&mut self, v: Voxel, value: f32) {
        debug_assert!(value.is_finite());
        let idx = self.dims.index(v);
        self.data[idx] = value;
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }
}

/// Dense 3D mask; every stored value is exactly 0 or 1.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryVolume {
    dims: Dims,
    spacing: Spacing,
    data: Vec<u8>,
}

impl BinaryVolume {
    pub fn new(dims: Dims, spacing: Spacing, data: Vec<u8>) -> Result<Self> {
        if data.len() != dims.len() {
            return Err(Error::InvalidVolume(format!(
                "data length {} does not match dims {} ({} voxels)",
                data.len(),
                dims,
                dims.len()
            )));
        }
        spacing.validate()?;
        if let Some(i) = data.iter().position(|&v| v > 1) {
            return Err(Error::InvalidVolume(format!(
                "mask value {} at index {i} is not 0 or 1",
                data[i]
            )));
        }
        Ok(BinaryVolume { dims, spacing, data })
    }

    /// All-background mask with unit spacing.
    pub fn zeros(dims: Dims) -> Self {
        BinaryVolume { dims, spacing: Spacing::isotropic(1.0), data: vec![0; dims.len()] }
    }

    /// Mask with the given foreground voxels set; out-of-bounds voxels error.
    pub fn from_voxels(dims: Dims, voxels: &[Voxel]) -> Result<Self> {
        let mut mask = BinaryVolume::zeros(dims);
        for &v in voxels {
            if !dims.contains(v) {
                return Err(Error::OutOfBounds(v, dims));
            }
            mask.data[dims.index(v)] = 1;
        }
        Ok(mask)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn set_spacing(&mut self, spacing: Spacing) {
        self.spacing = spacing;
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, v: Voxel) -> u8 {
        self.data[self.dims.index(v)]
    }

    pub fn set(&mut self, v: Voxel, value: bool) {
        self.data[self.dims.index(v)] = value as u8;
    }

    pub(crate) fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    /// Number of foreground voxels.
    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v == 1).count()
    }

    pub fn is_mask_empty(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    /// Foreground voxels in index order (ascending z, y, x-fastest).
    pub fn foreground(&self) -> Vec<Voxel> {
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == 1)
            .map(|(i, _)| self.dims.voxel(i))
            .collect()
    }
}

/// Dice overlap coefficient `2|A∩B| / (|A|+|B|)`.
///
/// Two empty masks score 1.0: there is no disagreement anywhere.
pub fn dice(pred: &BinaryVolume, label: &BinaryVolume) -> Result<f64> {
    if pred.dims() != label.dims() {
        return Err(Error::DimMismatch(pred.dims(), label.dims()));
    }
    let mut intersection = 0u64;
    let mut total = 0u64;
    for (&p, &l) in pred.data().iter().zip(label.data().iter()) {
        intersection += (p & l) as u64;
        total += (p + l) as u64;
    }
    if total == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * intersection as f64 / total as f64)
}

/// Splits prediction error into the two click classes:
/// `under = label ∧ ¬pred` (missed lesion) and `over = pred ∧ ¬label`
/// (spurious prediction).
pub fn error_masks(pred: &BinaryVolume, label: &BinaryVolume) -> Result<(BinaryVolume, BinaryVolume)> {
    if pred.dims() != label.dims() {
        return Err(Error::DimMismatch(pred.dims(), label.dims()));
    }
    let mut under = BinaryVolume::zeros(label.dims());
    under.spacing = label.spacing;
    let mut over = BinaryVolume::zeros(label.dims());
    over.spacing = label.spacing;
    for i in 0..label.data.len() {
        under.data[i] = label.data[i] & !pred.data[i] & 1;
        over.data[i] = pred.data[i] & !label.data[i] & 1;
    }
    Ok((under, over))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube(dims: Dims, from: (u32, u32, u32), to: (u32, u32, u32)) -> BinaryVolume {
        let mut voxels = Vec::new();
        for z in from.2..=to.2 {
            for y in from.1..=to.1 {
                for x in from.0..=to.0 {
                    voxels.push(Voxel::new(x, y, z));
                }
            }
        }
        BinaryVolume::from_voxels(dims, &voxels).unwrap()
    }

    #[test]
    fn dice_identity() {
        let dims = Dims::new(4, 4, 4);
        let a = cube(dims, (0, 0, 0), (1, 1, 1));
        assert_eq!(dice(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn dice_disjoint() {
        let dims = Dims::new(4, 4, 4);
        let a = cube(dims, (0, 0, 0), (0, 0, 0));
        let b = cube(dims, (3, 3, 3), (3, 3, 3));
        assert_eq!(dice(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn dice_half_overlapping_cubes() {
        // 2x2x2 cube against the same cube shifted by one along x:
        // 4 shared voxels out of 8+8.
        let dims = Dims::new(4, 4, 4);
        let pred = cube(dims, (0, 0, 0), (1, 1, 1));
        let label = cube(dims, (1, 0, 0), (2, 1, 1));
        // Brute-force oracle over voxel sets.
        let pa: std::collections::HashSet<_> = pred.foreground().into_iter().collect();
        let pb: std::collections::HashSet<_> = label.foreground().into_iter().collect();
        let inter = pa.intersection(&pb).count();
        let expect = 2.0 * inter as f64 / (pa.len() + pb.len()) as f64;
        assert_eq!(expect, 0.5);
        assert_eq!(dice(&pred, &label).unwrap(), 0.5);
    }

    #[test]
    fn dice_both_empty_is_one() {
        let dims = Dims::new(3, 3, 3);
        let e = BinaryVolume::zeros(dims);
        assert_eq!(dice(&e, &e).unwrap(), 1.0);
    }

    #[test]
    fn dice_dim_mismatch_errors() {
        let a = BinaryVolume::zeros(Dims::new(2, 2, 2));
        let b = BinaryVolume::zeros(Dims::new(3, 2, 2));
        assert!(dice(&a, &b).is_err());
    }

    #[test]
    fn error_masks_set_arithmetic() {
        let dims = Dims::new(5, 3, 3);
        let label =
            BinaryVolume::from_voxels(dims, &[Voxel::new(1, 1, 1), Voxel::new(2, 1, 1)]).unwrap();
        let pred =
            BinaryVolume::from_voxels(dims, &[Voxel::new(2, 1, 1), Voxel::new(3, 1, 1)]).unwrap();
        let (under, over) = error_masks(&pred, &label).unwrap();
        assert_eq!(under.foreground(), vec![Voxel::new(1, 1, 1)]);
        assert_eq!(over.foreground(), vec![Voxel::new(3, 1, 1)]);
    }

    #[test]
    fn error_masks_perfect_prediction() {
        let dims = Dims::new(4, 4, 4);
        let label = cube(dims, (1, 1, 1), (2, 2, 2));
        let (under, over) = error_masks(&label, &label).unwrap();
        assert!(under.is_mask_empty());
        assert!(over.is_mask_empty());
    }

    #[test]
    fn error_masks_null_prediction() {
        let dims = Dims::new(4, 4, 4);
        let label = cube(dims, (1, 1, 1), (2, 2, 2));
        let pred = BinaryVolume::zeros(dims);
        let (under, over) = error_masks(&pred, &label).unwrap();
        assert_eq!(under, label);
        assert!(over.is_mask_empty());
    }

    #[test]
    fn scalar_volume_rejects_nan() {
        let dims = Dims::new(2, 1, 1);
        assert!(ScalarVolume::new(dims, Spacing::isotropic(1.0), vec![0.0, f32::NAN]).is_err());
    }

    #[test]
    fn binary_volume_rejects_non_binary() {
        let dims = Dims::new(2, 1, 1);
        assert!(BinaryVolume::new(dims, Spacing::isotropic(1.0), vec![0, 2]).is_err());
    }

    #[test]
    fn spacing_must_be_positive() {
        let dims = Dims::new(1, 1, 1);
        assert!(ScalarVolume::new(dims, Spacing::new(1.0, 0.0, 1.0), vec![0.0]).is_err());
        assert!(ScalarVolume::new(dims, Spacing::new(1.0, -2.0, 1.0), vec![0.0]).is_err());
    }

    #[test]
    fn index_round_trip() {
        let dims = Dims::new(3, 4, 5);
        for i in 0..dims.len() {
            assert_eq!(dims.index(dims.voxel(i)), i);
        }
    }
}
