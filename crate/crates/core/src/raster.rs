//! In-memory multi-band image, band-major then row-major.

use crate::error::{Error, Result};
use crate::tensor::Tensor4;

#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    bands: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Raster {
    pub fn zeros(bands: usize, height: usize, width: usize) -> Self {
        Self::filled(bands, height, width, 0.0)
    }

    pub fn filled(bands: usize, height: usize, width: usize, value: f64) -> Self {
        Self {
            bands,
            height,
            width,
            data: vec![value; bands * height * width],
        }
    }

    pub fn from_vec(bands: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != bands * height * width {
            return Err(Error::invalid(format!(
                "raster {bands}x{height}x{width} needs {} values, got {}",
                bands * height * width,
                data.len()
            )));
        }
        Ok(Self {
            bands,
            height,
            width,
            data,
        })
    }

    /// Stacks single-band planes of equal size.
    pub fn from_bands(planes: &[Vec<f64>], height: usize, width: usize) -> Result<Self> {
        let mut data = Vec::with_capacity(planes.len() * height * width);
        for p in planes {
            if p.len() != height * width {
                return Err(Error::invalid("band plane has wrong length"));
            }
            data.extend_from_slice(p);
        }
        Self::from_vec(planes.len(), height, width, data)
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.bands, self.height, self.width)
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn band(&self, b: usize) -> &[f64] {
        let n = self.pixels();
        &self.data[b * n..(b + 1) * n]
    }

    pub fn band_mut(&mut self, b: usize) -> &mut [f64] {
        let n = self.pixels();
        &mut self.data[b * n..(b + 1) * n]
    }

    #[inline]
    pub fn get(&self, b: usize, y: usize, x: usize) -> f64 {
        self.data[(b * self.height + y) * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, b: usize, y: usize, x: usize, v: f64) {
        self.data[(b * self.height + y) * self.width + x] = v;
    }

    /// Copies a single band out as a one-band raster.
    pub fn extract_band(&self, b: usize) -> Raster {
        Raster {
            bands: 1,
            height: self.height,
            width: self.width,
            data: self.band(b).to_vec(),
        }
    }

    /// Rectangular window `[y0, y0+h) x [x0, x0+w)` of every band.
    pub fn crop(&self, y0: usize, x0: usize, h: usize, w: usize) -> Result<Raster> {
        if y0 + h > self.height || x0 + w > self.width {
            return Err(Error::invalid(format!(
                "crop {h}x{w}@({y0},{x0}) outside {}x{}",
                self.height, self.width
            )));
        }
        let mut out = Raster::zeros(self.bands, h, w);
        for b in 0..self.bands {
            for y in 0..h {
                let src = (b * self.height + y0 + y) * self.width + x0;
                let dst = (b * h + y) * w;
                out.data[dst..dst + w].copy_from_slice(&self.data[src..src + w]);
            }
        }
        Ok(out)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Raster {
        Raster {
            data: self.data.iter().map(|&v| f(v)).collect(),
            ..self.clone()
        }
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn same_dims(&self, other: &Raster) -> bool {
        self.dims() == other.dims()
    }

    /// One-sample tensor view, `(1, bands, height, width)`.
    pub fn to_tensor(&self) -> Tensor4 {
        Tensor4::from_vec([1, self.bands, self.height, self.width], self.data.clone())
            .expect("raster length matches its dims")
    }

    /// Takes sample `n` of a batched tensor.
    pub fn from_tensor(t: &Tensor4, n: usize) -> Raster {
        let [_, c, h, w] = t.shape();
        let len = c * h * w;
        Raster {
            bands: c,
            height: h,
            width: w,
            data: t.data()[n * len..(n + 1) * len].to_vec(),
        }
    }
}

pub(crate) fn ensure_same_dims(op: &'static str, a: &Raster, b: &Raster) -> Result<()> {
    if a.same_dims(b) {
        Ok(())
    } else {
        Err(Error::ShapeMismatch {
            op,
            left: [1, a.bands, a.height, a.width],
            right: [1, b.bands, b.height, b.width],
        })
    }
}
