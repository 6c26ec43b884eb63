//! Native volume interchange format: a JSON sidecar describing the grid
//! plus a raw little-endian data file.
//!
//! For a volume `foo.bin` the sidecar is `foo.json`:
//!
//! ```json
//! {"version":1,"dims":[w,h,d],"spacing":[sx,sy,sz],"dtype":"f32","byte_order":"little-endian"}
//! ```
//!
//! The raw file holds exactly `w*h*d` values in row-major order with x
//! fastest; `f32` volumes are scalar data, `u8` volumes are binary masks.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{BinaryVolume, Dims, ScalarVolume, Spacing};

use super::{atomic_write, read_file, Volume, MAX_VOXELS};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sidecar {
    pub version: u32,
    pub dims: [u64; 3],
    pub spacing: [f32; 3],
    pub dtype: String,
    pub byte_order: String,
}

impl Sidecar {
    fn voxel_count(&self) -> Result<usize> {
        let count = self.dims.iter().try_fold(1u64, |acc, &d| acc.checked_mul(d));
        match count {
            Some(c) if c > 0 && c <= MAX_VOXELS => Ok(c as usize),
            Some(0) => Err(Error::Format("sidecar dims contain a zero extent".into())),
            _ => Err(Error::Format(format!(
                "sidecar dims {:?} exceed the supported voxel count",
                self.dims
            ))),
        }
    }

    fn grid(&self) -> Result<(Dims, Spacing)> {
        self.voxel_count()?;
        let dims =
            Dims::new(self.dims[0] as usize, self.dims[1] as usize, self.dims[2] as usize);
        for (axis, s) in ["x", "y", "z"].iter().zip(self.spacing.iter()) {
            if !s.is_finite() || *s <= 0.0 {
                return Err(Error::Format(format!(
                    "sidecar spacing.{axis} must be finite and positive, got {s}"
                )));
            }
        }
        Ok((dims, Spacing::new(self.spacing[0], self.spacing[1], self.spacing[2])))
    }
}

/// Parses and validates a sidecar document.
pub fn parse_sidecar(bytes: &[u8]) -> Result<Sidecar> {
    let sidecar: Sidecar =
        serde_json::from_slice(bytes).map_err(|e| Error::json("volume sidecar", e))?;
    if sidecar.version != 1 {
        return Err(Error::Format(format!(
            "unsupported sidecar version {}, expected 1",
            sidecar.version
        )));
    }
    if sidecar.byte_order != "little-endian" {
        return Err(Error::Format(format!(
            "unsupported byte_order '{}', expected 'little-endian'",
            sidecar.byte_order
        )));
    }
    if sidecar.dtype != "f32" && sidecar.dtype != "u8" {
        return Err(Error::Format(format!(
            "unsupported dtype '{}', expected 'f32' or 'u8'",
            sidecar.dtype
        )));
    }
    sidecar.grid()?;
    Ok(sidecar)
}

/// Decodes a raw data file against its sidecar.
pub fn decode_raw(sidecar: &Sidecar, raw: &[u8]) -> Result<Volume> {
    let (dims, spacing) = sidecar.grid()?;
    let count = sidecar.voxel_count()?;
    match sidecar.dtype.as_str() {
        "f32" => {
            let expected = count * 4;
            if raw.len() != expected {
                return Err(Error::Format(format!(
                    "raw size mismatch: expected {expected} bytes for {count} f32 voxels, found {}",
                    raw.len()
                )));
            }
            let data: Vec<f32> = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            Ok(Volume::Scalar(ScalarVolume::new(dims, spacing, data)?))
        }
        "u8" => {
            if raw.len() != count {
                return Err(Error::Format(format!(
                    "raw size mismatch: expected {count} bytes for u8 voxels, found {}",
                    raw.len()
                )));
            }
            Ok(Volume::Binary(BinaryVolume::new(dims, spacing, raw.to_vec())?))
        }
        _ => unreachable!("dtype validated by parse_sidecar"),
    }
}

/// Sidecar path for a `.bin` volume: same stem, `.json` extension.
pub fn sidecar_path(volume_path: &Path) -> PathBuf {
    volume_path.with_extension("json")
}

/// Reads `<stem>.bin` together with its `<stem>.json` sidecar.
pub fn read_native(path: &Path) -> Result<Volume> {
    let sidecar = parse_sidecar(&read_file(&sidecar_path(path))?)?;
    decode_raw(&sidecar, &read_file(path)?)
}

fn write_pair(path: &Path, sidecar: &Sidecar, raw: &[u8]) -> Result<()> {
    let mut json = serde_json::to_vec_pretty(sidecar)
        .map_err(|e| Error::json("volume sidecar", e))?;
    json.push(b'\n');
    atomic_write(&sidecar_path(path), &json)?;
    atomic_write(path, raw)
}

/// Writes a scalar volume as `f32` raw plus sidecar.
pub fn write_scalar(path: &Path, volume: &ScalarVolume) -> Result<()> {
    let dims = volume.dims();
    let sidecar = Sidecar {
        version: 1,
        dims: [dims.w as u64, dims.h as u64, dims.d as u64],
        spacing: [volume.spacing().x, volume.spacing().y, volume.spacing().z],
        dtype: "f32".into(),
        byte_order: "little-endian".into(),
    };
    let mut raw = Vec::with_capacity(volume.data().len() * 4);
    for v in volume.data() {
        raw.extend_from_slice(&v.to_le_bytes());
    }
    write_pair(path, &sidecar, &raw)
}

/// Writes a binary mask as `u8` raw plus sidecar.
pub fn write_binary(path: &Path, volume: &BinaryVolume) -> Result<()> {
    let dims = volume.dims();
    let sidecar = Sidecar {
        version: 1,
        dims: [dims.w as u64, dims.h as u64, dims.d as u64],
        spacing: [volume.spacing().x, volume.spacing().y, volume.spacing().z],
        dtype: "u8".into(),
        byte_order: "little-endian".into(),
    };
    write_pair(path, &sidecar, volume.data())
}
