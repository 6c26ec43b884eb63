//! Minimal read-only NIfTI-1 support: single-file `.nii`, optionally
//! gzip-compressed, 3D only, datatypes uint8 / int16 / float32.
//!
//! Only the header fields needed to decode the voxel grid are honored:
//! `dim`, `pixdim`, `datatype`, `vox_offset`, `scl_slope`, `scl_inter`.
//! Both byte orders are handled via the `dim[0]` plausibility rule.

use std::io::Read;

use byteorder::{BigEndian, ByteOrder, LittleEndian};
use flate2::read::GzDecoder;

use crate::error::{Error, Result};
use crate::volume::{BinaryVolume, Dims, ScalarVolume, Spacing};

use super::{Volume, MAX_VOXELS};

const HEADER_LEN: usize = 348;

mod offsets {
    pub const SIZEOF_HDR: usize = 0;
    pub const DIM: usize = 40;
    pub const DATATYPE: usize = 70;
    pub const PIXDIM: usize = 76;
    pub const VOX_OFFSET: usize = 108;
    pub const SCL_SLOPE: usize = 112;
    pub const SCL_INTER: usize = 116;
    pub const MAGIC: usize = 344;
}

mod datatype {
    pub const UINT8: i16 = 2;
    pub const INT16: i16 = 4;
    pub const FLOAT32: i16 = 16;
}

struct Header {
    dims: Dims,
    spacing: Spacing,
    datatype: i16,
    vox_offset: usize,
    scl_slope: f32,
    scl_inter: f32,
    big_endian: bool,
}

fn parse_header(raw: &[u8; HEADER_LEN]) -> Result<Header> {
    // Endianness: dim[0] must land in 1..=7 in exactly one byte order.
    let dim0_le = LittleEndian::read_i16(&raw[offsets::DIM..]);
    let big_endian = !(1..=7).contains(&dim0_le);
    let read_i16 = |at: usize| -> i16 {
        if big_endian { BigEndian::read_i16(&raw[at..]) } else { LittleEndian::read_i16(&raw[at..]) }
    };
    let read_i32 = |at: usize| -> i32 {
        if big_endian { BigEndian::read_i32(&raw[at..]) } else { LittleEndian::read_i32(&raw[at..]) }
    };
    let read_f32 = |at: usize| -> f32 {
        if big_endian { BigEndian::read_f32(&raw[at..]) } else { LittleEndian::read_f32(&raw[at..]) }
    };

    if read_i32(offsets::SIZEOF_HDR) != HEADER_LEN as i32 {
        return Err(Error::Format(format!(
            "sizeof_hdr is {}, expected {HEADER_LEN}",
            read_i32(offsets::SIZEOF_HDR)
        )));
    }
    let magic = &raw[offsets::MAGIC..offsets::MAGIC + 4];
    if magic != b"n+1\0" {
        if magic.starts_with(b"ni1") {
            return Err(Error::Format(
                "two-file NIfTI (magic 'ni1') is unsupported; expected single-file 'n+1'".into(),
            ));
        }
        return Err(Error::Format(format!("bad magic {magic:?}, expected 'n+1'")));
    }

    let ndim = read_i16(offsets::DIM);
    if ndim != 3 {
        return Err(Error::Format(format!("expected 3 dims, header dim[0] is {ndim}")));
    }
    let mut extents = [0i64; 3];
    for (i, e) in extents.iter_mut().enumerate() {
        let v = read_i16(offsets::DIM + 2 * (i + 1));
        if v < 1 {
            return Err(Error::Format(format!("dim[{}] is {v}, must be >= 1", i + 1)));
        }
        *e = v as i64;
    }
    let count = extents.iter().product::<i64>() as u64;
    if count > MAX_VOXELS {
        return Err(Error::Format(format!(
            "dim {extents:?} exceeds the supported voxel count"
        )));
    }

    let datatype = read_i16(offsets::DATATYPE);
    if ![datatype::UINT8, datatype::INT16, datatype::FLOAT32].contains(&datatype) {
        return Err(Error::Format(format!(
            "unsupported datatype code {datatype}; expected 2 (uint8), 4 (int16), or 16 (float32)"
        )));
    }

    let mut pixdim = [0.0f32; 3];
    for (i, p) in pixdim.iter_mut().enumerate() {
        let v = read_f32(offsets::PIXDIM + 4 * (i + 1));
        if !v.is_finite() || v <= 0.0 {
            return Err(Error::Format(format!(
                "pixdim[{}] is {v}, must be finite and positive",
                i + 1
            )));
        }
        *p = v;
    }

    let vox_offset = read_f32(offsets::VOX_OFFSET);
    if !vox_offset.is_finite() || vox_offset < HEADER_LEN as f32 || vox_offset.fract() != 0.0 {
        return Err(Error::Format(format!(
            "vox_offset is {vox_offset}, must be an integer >= {HEADER_LEN}"
        )));
    }

    Ok(Header {
        dims: Dims::new(extents[0] as usize, extents[1] as usize, extents[2] as usize),
        spacing: Spacing::new(pixdim[0], pixdim[1], pixdim[2]),
        datatype,
        vox_offset: vox_offset as usize,
        scl_slope: read_f32(offsets::SCL_SLOPE),
        scl_inter: read_f32(offsets::SCL_INTER),
        big_endian,
    })
}

/// Reads exactly `n` bytes, growing the buffer as data arrives so a
/// truncated stream never allocates more than it provides.
fn read_exactly<R: Read>(reader: &mut R, n: usize, what: &str) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    let copied = std::io::copy(&mut reader.take(n as u64), &mut buf)
        .map_err(|e| Error::Format(format!("reading {what}: {e}")))?;
    if copied as usize != n {
        return Err(Error::Format(format!(
            "truncated {what}: expected {n} bytes, found {copied}"
        )));
    }
    Ok(buf)
}

fn decode<R: Read>(mut reader: R) -> Result<Volume> {
    let header_bytes = read_exactly(&mut reader, HEADER_LEN, "NIfTI header")?;
    let mut raw = [0u8; HEADER_LEN];
    raw.copy_from_slice(&header_bytes);
    let header = parse_header(&raw)?;

    // Skip to the data section.
    let skip = header.vox_offset - HEADER_LEN;
    if skip > 0 {
        read_exactly(&mut reader, skip, "NIfTI pre-data padding")?;
    }

    let count = header.dims.len();
    let bytes_per = match header.datatype {
        datatype::UINT8 => 1,
        datatype::INT16 => 2,
        datatype::FLOAT32 => 4,
        _ => unreachable!(),
    };
    let data = read_exactly(&mut reader, count * bytes_per, "NIfTI voxel data")?;

    // slope = 0 means "no scaling" per the format's convention.
    let scaled = header.scl_slope != 0.0
        && (header.scl_slope != 1.0 || header.scl_inter != 0.0);
    let apply = |v: f32| -> f32 {
        if scaled { v * header.scl_slope + header.scl_inter } else { v }
    };

    let to_scalar = |values: Vec<f32>| -> Result<Volume> {
        let volume = ScalarVolume::new(header.dims, header.spacing, values).map_err(|e| {
            Error::Format(format!("NIfTI data failed validation: {e}"))
        })?;
        Ok(Volume::Scalar(volume))
    };

    match header.datatype {
        datatype::UINT8 => {
            if !scaled && data.iter().all(|&v| v <= 1) {
                let mask = BinaryVolume::new(header.dims, header.spacing, data)
                    .expect("validated u8 mask");
                Ok(Volume::Binary(mask))
            } else {
                to_scalar(data.iter().map(|&v| apply(v as f32)).collect())
            }
        }
        datatype::INT16 => {
            let values: Vec<f32> = data
                .chunks_exact(2)
                .map(|c| {
                    let v = if header.big_endian {
                        BigEndian::read_i16(c)
                    } else {
                        LittleEndian::read_i16(c)
                    };
                    apply(v as f32)
                })
                .collect();
            to_scalar(values)
        }
        datatype::FLOAT32 => {
            let values: Vec<f32> = data
                .chunks_exact(4)
                .map(|c| {
                    let v = if header.big_endian {
                        BigEndian::read_f32(c)
                    } else {
                        LittleEndian::read_f32(c)
                    };
                    apply(v)
                })
                .collect();
            to_scalar(values)
        }
        _ => unreachable!(),
    }
}

/// Parses a NIfTI-1 volume from raw bytes; gzip is detected by its magic.
pub fn parse_nifti(bytes: &[u8]) -> Result<Volume> {
    if bytes.starts_with(&[0x1f, 0x8b]) {
        decode(GzDecoder::new(bytes))
    } else {
        decode(bytes)
    }
}
