//! Checkpoint file: a UTF-8 manifest, then one `MSR1` raster per tensor.
//!
//! ```text
//! SDRCNN-CHECKPOINT 1
//! config bands=8 width=52 ...
//! tensor <name> <n> <c> <h> <w> f64 <trainable 0|1>
//! ...
//! end
//! <raster blobs in manifest order; tensor (n,c,h,w) stored as (n*c) x h x w>
//! ```

use std::path::Path;

use super::{SdrcnnConfig, SdrcnnParams};
use crate::error::{Error, Result};
use crate::io::raster_file::{decode_raster, encode_raster, write_atomic, Dtype};
use crate::raster::Raster;
use crate::tensor::{ParamStore, Tensor4};

const HEADER: &str = "SDRCNN-CHECKPOINT 1";

pub fn write_checkpoint(params: &SdrcnnParams) -> Result<Vec<u8>> {
    let mut manifest = String::new();
    manifest.push_str(HEADER);
    manifest.push('\n');
    manifest.push_str("config");
    for (k, v) in params.config().to_pairs() {
        manifest.push_str(&format!(" {k}={v}"));
    }
    manifest.push('\n');
    for e in params.store().entries() {
        let [n, c, h, w] = e.tensor.shape();
        manifest.push_str(&format!(
            "tensor {} {n} {c} {h} {w} {} {}\n",
            e.name,
            Dtype::F64.name(),
            u8::from(e.trainable)
        ));
    }
    manifest.push_str("end\n");
    let mut out = manifest.into_bytes();
    for e in params.store().entries() {
        let [n, c, h, w] = e.tensor.shape();
        let r = Raster::from_vec(n * c, h, w, e.tensor.data().to_vec())?;
        out.extend(encode_raster(&r, Dtype::F64)?);
    }
    Ok(out)
}

pub fn read_checkpoint(bytes: &[u8], path: &Path) -> Result<SdrcnnParams> {
    let bad = |d: String| Error::parse("checkpoint", format!("{}: {d}", path.display()));
    let mut pos = 0;
    let next_line = |pos: &mut usize| -> Result<String> {
        let rest = &bytes[*pos..];
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| bad("manifest is not newline-terminated".into()))?;
        *pos += end + 1;
        String::from_utf8(rest[..end].to_vec()).map_err(|_| bad("manifest is not UTF-8".into()))
    };

    if next_line(&mut pos)? != HEADER {
        return Err(bad("missing checkpoint header".into()));
    }
    let config_line = next_line(&mut pos)?;
    let mut config = SdrcnnConfig::default();
    let mut fields = config_line.split_whitespace();
    if fields.next() != Some("config") {
        return Err(bad("missing config line".into()));
    }
    for kv in fields {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| bad(format!("bad config field {kv}")))?;
        if !config.set(k, v)? {
            return Err(bad(format!("unknown config key {k}")));
        }
    }

    let mut specs = Vec::new();
    loop {
        let line = next_line(&mut pos)?;
        if line == "end" {
            break;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 8 || f[0] != "tensor" {
            return Err(bad(format!("bad tensor line {line:?}")));
        }
        let dims: Vec<usize> = f[2..6]
            .iter()
            .map(|s| s.parse().map_err(|_| bad(format!("bad dimension in {line:?}"))))
            .collect::<Result<_>>()?;
        let dtype = Dtype::from_name(f[6]).ok_or_else(|| bad(format!("bad dtype in {line:?}")))?;
        specs.push((
            f[1].to_string(),
            [dims[0], dims[1], dims[2], dims[3]],
            dtype,
            f[7] == "1",
        ));
    }

    let mut store = ParamStore::new();
    for (name, shape, dtype, trainable) in specs {
        let (r, found, used) = decode_raster(&bytes[pos..], path)?;
        pos += used;
        if found != dtype {
            return Err(Error::DtypeMismatch {
                path: path.into(),
                expected: dtype.code(),
                found: found.code(),
            });
        }
        if r.dims() != (shape[0] * shape[1], shape[2], shape[3]) {
            return Err(bad(format!("tensor {name} payload does not match {shape:?}")));
        }
        store.insert(name, Tensor4::from_vec(shape, r.into_vec())?, trainable)?;
    }
    if pos != bytes.len() {
        return Err(bad(format!("{} trailing bytes", bytes.len() - pos)));
    }
    SdrcnnParams::from_store(config, store)
}

pub fn save_checkpoint(params: &SdrcnnParams, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &write_checkpoint(params)?)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<SdrcnnParams> {
    let path = path.as_ref();
    read_checkpoint(&crate::io::read_file(path)?, path)
}
