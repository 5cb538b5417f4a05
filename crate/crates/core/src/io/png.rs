//! 8-bit PNG export for inspection. PNGs are never read back.

use std::io::Cursor;
use std::path::Path;

use image::{ImageFormat, RgbImage};

use super::write_atomic;
use crate::error::{Error, Result};
use crate::raster::Raster;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PngMapping {
    /// Three bands shown as red, green, blue.
    Rgb([usize; 3]),
    Gray(usize),
    /// One band through [`heat_color`].
    Heatmap(usize),
}

/// Display bands for true colour: red, green, blue in that order.
pub fn default_rgb(bands: usize) -> PngMapping {
    match bands {
        8 => PngMapping::Rgb([4, 2, 1]),
        4 => PngMapping::Rgb([2, 1, 0]),
        b if b >= 3 => PngMapping::Rgb([2, 1, 0]),
        _ => PngMapping::Gray(0),
    }
}

/// Linear map of `[min, max]` onto `[0, 1]`, clamped. A zero-width range maps
/// everything to 0.
pub fn unit(v: f64, min: f64, max: f64) -> f64 {
    if max > min {
        ((v - min) / (max - min)).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

pub fn to_u8(t: f64) -> u8 {
    (t.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Heatmap ramp black -> red -> yellow -> white in three equal linear
/// segments, so every channel is non-decreasing in `t`.
pub fn heat_color(t: f64) -> [u8; 3] {
    let t = t.clamp(0.0, 1.0) * 3.0;
    let r = t.min(1.0);
    let g = (t - 1.0).clamp(0.0, 1.0);
    let b = (t - 2.0).clamp(0.0, 1.0);
    [to_u8(r), to_u8(g), to_u8(b)]
}

pub fn render(raster: &Raster, mapping: PngMapping, min: f64, max: f64) -> Result<RgbImage> {
    let check = |b: usize| {
        if b < raster.bands() {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "band {b} out of range for {} bands",
                raster.bands()
            )))
        }
    };
    match mapping {
        PngMapping::Rgb(bs) => bs.iter().try_for_each(|&b| check(b))?,
        PngMapping::Gray(b) | PngMapping::Heatmap(b) => check(b)?,
    }
    let (h, w) = (raster.height(), raster.width());
    let mut buf = Vec::with_capacity(h * w * 3);
    for p in 0..h * w {
        let px = match mapping {
            PngMapping::Rgb(bs) => bs.map(|b| to_u8(unit(raster.band(b)[p], min, max))),
            PngMapping::Gray(b) => [to_u8(unit(raster.band(b)[p], min, max)); 3],
            PngMapping::Heatmap(b) => heat_color(unit(raster.band(b)[p], min, max)),
        };
        buf.extend_from_slice(&px);
    }
    RgbImage::from_raw(w as u32, h as u32, buf).ok_or_else(|| Error::invalid("image buffer size"))
}

pub fn encode_png(img: &RgbImage) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    img.write_to(&mut Cursor::new(&mut out), ImageFormat::Png)?;
    Ok(out)
}

pub fn export_png(raster: &Raster, mapping: PngMapping, min: f64, max: f64, path: &Path) -> Result<()> {
    write_atomic(path, &encode_png(&render(raster, mapping, min, max)?)?)
}
