//! `MSR1` raster container.
//!
//! ```text
//! offset size
//!  0     4    magic "MSR1"
//!  4     2    version (u16, = 1)
//!  6     2    bands (u16)
//!  8     4    height (u32)
//! 12     4    width (u32)
//! 16     1    dtype: 0 = f64, 1 = f32
//! 17     3    reserved, zero
//! 20     ..   payload, little-endian, band-major then row-major
//! ```

use std::path::Path;

use crate::error::{Error, Result};
use crate::raster::Raster;

pub const MAGIC: &[u8; 4] = b"MSR1";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Dtype {
    #[default]
    F64,
    F32,
}

impl Dtype {
    pub fn code(self) -> u8 {
        match self {
            Dtype::F64 => 0,
            Dtype::F32 => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Dtype::F64),
            1 => Some(Dtype::F32),
            _ => None,
        }
    }

    pub fn size(self) -> usize {
        match self {
            Dtype::F64 => 8,
            Dtype::F32 => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Dtype::F64 => "f64",
            Dtype::F32 => "f32",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "f64" => Some(Dtype::F64),
            "f32" => Some(Dtype::F32),
            _ => None,
        }
    }
}

pub fn encode_raster(r: &Raster, dtype: Dtype) -> Result<Vec<u8>> {
    let bands = u16::try_from(r.bands()).map_err(|_| Error::invalid("more than 65535 bands"))?;
    let height = u32::try_from(r.height()).map_err(|_| Error::invalid("height exceeds u32"))?;
    let width = u32::try_from(r.width()).map_err(|_| Error::invalid("width exceeds u32"))?;
    let mut out = Vec::with_capacity(HEADER_LEN + r.data().len() * dtype.size());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&bands.to_le_bytes());
    out.extend_from_slice(&height.to_le_bytes());
    out.extend_from_slice(&width.to_le_bytes());
    out.push(dtype.code());
    out.extend_from_slice(&[0u8; 3]);
    match dtype {
        Dtype::F64 => r.data().iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
        Dtype::F32 => r
            .data()
            .iter()
            .for_each(|&v| out.extend_from_slice(&(v as f32).to_le_bytes())),
    }
    Ok(out)
}

/// Decodes one raster from the front of `bytes`; returns it with its dtype
/// and the number of bytes consumed. `path` is only used in error messages.
pub fn decode_raster(bytes: &[u8], path: &Path) -> Result<(Raster, Dtype, usize)> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::BadMagic { path: path.into() });
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated {
            path: path.into(),
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let u16_at = |o: usize| u16::from_le_bytes([bytes[o], bytes[o + 1]]);
    let u32_at = |o: usize| u32::from_le_bytes([bytes[o], bytes[o + 1], bytes[o + 2], bytes[o + 3]]);
    let version = u16_at(4);
    if version != VERSION {
        return Err(Error::UnsupportedVersion {
            path: path.into(),
            version,
        });
    }
    let bands = u16_at(6) as usize;
    let height = u32_at(8) as usize;
    let width = u32_at(12) as usize;
    let dtype = Dtype::from_code(bytes[16])
        .ok_or_else(|| Error::parse("raster header", format!("unknown dtype code {}", bytes[16])))?;
    let count = bands * height * width;
    let expected = HEADER_LEN + count * dtype.size();
    if bytes.len() < expected {
        return Err(Error::Truncated {
            path: path.into(),
            expected,
            found: bytes.len(),
        });
    }
    let payload = &bytes[HEADER_LEN..expected];
    let data: Vec<f64> = match dtype {
        Dtype::F64 => payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect(),
        Dtype::F32 => payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect(),
    };
    Ok((Raster::from_vec(bands, height, width, data)?, dtype, expected))
}

/// Reads a whole file, naming the path in any error.
pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_raster(path: impl AsRef<Path>) -> Result<Raster> {
    Ok(read_raster_with_dtype(path)?.0)
}

pub fn read_raster_with_dtype(path: impl AsRef<Path>) -> Result<(Raster, Dtype)> {
    let path = path.as_ref();
    let bytes = read_file(path)?;
    let (r, dtype, used) = decode_raster(&bytes, path)?;
    if used != bytes.len() {
        return Err(Error::parse(
            "raster file",
            format!("{}: {} trailing bytes", path.display(), bytes.len() - used),
        ));
    }
    Ok((r, dtype))
}

/// Reads a raster that must be stored with `dtype`.
pub fn read_raster_expect(path: impl AsRef<Path>, dtype: Dtype) -> Result<Raster> {
    let (r, found) = read_raster_with_dtype(path.as_ref())?;
    if found != dtype {
        return Err(Error::DtypeMismatch {
            path: path.as_ref().into(),
            expected: dtype.code(),
            found: found.code(),
        });
    }
    Ok(r)
}

pub fn write_raster(raster: &Raster, path: impl AsRef<Path>) -> Result<()> {
    write_raster_as(raster, path, Dtype::F64)
}

pub fn write_raster_as(raster: &Raster, path: impl AsRef<Path>, dtype: Dtype) -> Result<()> {
    write_atomic(path.as_ref(), &encode_raster(raster, dtype)?)
}

/// Writes to a sibling temp file, then renames over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("{} is not a file path", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}
