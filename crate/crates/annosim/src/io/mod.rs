//! Serialization: volumes (native raw+sidecar and a minimal NIfTI-1
//! subset), click logs, run configs, and reports.
//!
//! Every parser here has a byte-level entry point, separate from the
//! path-based loaders, so untrusted input can be parsed without touching
//! the filesystem. All writes are atomic (temp file + rename).

pub mod clicklog;
pub mod config;
pub mod native;
pub mod nifti;
pub mod report;

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::volume::{BinaryVolume, ScalarVolume};

/// Upper bound on voxel counts accepted from file headers, to keep
/// corrupt or hostile headers from demanding absurd allocations.
pub(crate) const MAX_VOXELS: u64 = 1 << 28;

/// A volume read from disk, binary or scalar depending on the stored dtype.
#[derive(Debug, Clone)]
pub enum Volume {
    Scalar(ScalarVolume),
    Binary(BinaryVolume),
}

impl Volume {
    pub fn into_scalar(self) -> Result<ScalarVolume> {
        match self {
            Volume::Scalar(v) => Ok(v),
            Volume::Binary(_) => {
                Err(Error::Format("expected scalar volume, found binary mask".into()))
            }
        }
    }

    pub fn into_binary(self) -> Result<BinaryVolume> {
        match self {
            Volume::Binary(v) => Ok(v),
            Volume::Scalar(_) => {
                Err(Error::Format("expected binary mask, found scalar volume".into()))
            }
        }
    }
}

/// Reads a volume, dispatching on extension: `.bin` is the native
/// raw+sidecar format, `.nii` / `.nii.gz` the NIfTI-1 subset.
pub fn read_volume(path: &Path) -> Result<Volume> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
    if name.ends_with(".bin") {
        native::read_native(path)
    } else if name.ends_with(".nii") || name.ends_with(".nii.gz") || name.ends_with(".gz") {
        let bytes = fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        nifti::parse_nifti(&bytes)
    } else {
        Err(Error::Format(format!(
            "cannot infer volume format of '{name}'; expected .bin, .nii, or .nii.gz"
        )))
    }
}

/// Writes `bytes` to `path` atomically: a unique sibling temp file is
/// written, flushed, then renamed over the target.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let file_name = path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| Error::Format(format!("invalid output path '{}'", path.display())))?;
    let tmp = dir.join(format!(".{file_name}.tmp-{}", std::process::id()));
    fs::write(&tmp, bytes).map_err(|e| Error::io(tmp.display().to_string(), e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(format!("renaming into {}", path.display()), e)
    })?;
    Ok(())
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))
}
