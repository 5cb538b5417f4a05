//! Classical baselines: Gram-Schmidt component substitution and smoothing
//! filter intensity modulation (SFIM).

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::raster::Raster;
use crate::tensor::upsample_bicubic;

#[derive(Debug, Clone, PartialEq)]
pub struct SfimOptions {
    /// Side of the box filter; odd and at least the resolution ratio.
    pub kernel: usize,
    pub eps: f64,
    /// When set, the PAN/smooth quotient is computed against `max(smooth, eps)`
    /// and clamped to `[lo, hi]`; when unset, a smooth value below `eps` is an error.
    pub clamp: Option<(f64, f64)>,
    pub ratio: usize,
}

impl Default for SfimOptions {
    fn default() -> Self {
        Self {
            kernel: 7,
            eps: 1e-6,
            clamp: Some((0.0, 4.0)),
            ratio: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GsOptions {
    /// Intensity weights; `None` means uniform 1/B.
    pub weights: Option<Vec<f64>>,
    /// Lower bound on var(I).
    pub eps: f64,
    pub ratio: usize,
}

impl Default for GsOptions {
    fn default() -> Self {
        Self {
            weights: None,
            eps: 1e-12,
            ratio: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ClassicalMethod {
    Gs(GsOptions),
    Sfim(SfimOptions),
}

impl ClassicalMethod {
    pub fn name(&self) -> &'static str {
        match self {
            ClassicalMethod::Gs(_) => "gs",
            ClassicalMethod::Sfim(_) => "sfim",
        }
    }

    pub fn apply(&self, pan: &Raster, lrms: &Raster) -> Result<Raster> {
        match self {
            ClassicalMethod::Gs(o) => gram_schmidt(pan, lrms, o),
            ClassicalMethod::Sfim(o) => sfim(pan, lrms, o),
        }
    }
}

impl fmt::Display for ClassicalMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassicalMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gs" => Ok(ClassicalMethod::Gs(GsOptions::default())),
            "sfim" => Ok(ClassicalMethod::Sfim(SfimOptions::default())),
            _ => Err(Error::invalid(format!("unknown classical method {s:?}"))),
        }
    }
}

fn check_pair(pan: &Raster, lrms: &Raster, ratio: usize) -> Result<()> {
    if pan.bands() != 1 {
        return Err(Error::invalid(format!("PAN must have one band, got {}", pan.bands())));
    }
    if ratio == 0 || pan.height() != ratio * lrms.height() || pan.width() != ratio * lrms.width() {
        return Err(Error::invalid(format!(
            "PAN {}x{} is not {ratio}x LRMS {}x{}",
            pan.height(),
            pan.width(),
            lrms.height(),
            lrms.width()
        )));
    }
    Ok(())
}

/// Bicubic upsampling of every band; also the plain interpolation baseline.
pub fn upsample(lrms: &Raster, ratio: usize) -> Result<Raster> {
    Ok(Raster::from_tensor(&upsample_bicubic(&lrms.to_tensor(), ratio)?, 0))
}

/// Box mean with edge replication, written as `p + mean(q - p)` so a
/// constant plane is reproduced exactly.
pub fn box_smooth(plane: &[f64], h: usize, w: usize, kernel: usize) -> Vec<f64> {
    let half = (kernel / 2) as isize;
    let area = (kernel * kernel) as f64;
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let c = plane[y * w + x];
            let mut acc = 0.0;
            for dy in -half..=half {
                let yy = (y as isize + dy).clamp(0, h as isize - 1) as usize;
                for dx in -half..=half {
                    let xx = (x as isize + dx).clamp(0, w as isize - 1) as usize;
                    acc += plane[yy * w + xx] - c;
                }
            }
            out[y * w + x] = c + acc / area;
        }
    }
    out
}

/// `HRMS_b = MS_up_b * PAN / smooth(PAN)`.
pub fn sfim(pan: &Raster, lrms: &Raster, opts: &SfimOptions) -> Result<Raster> {
    check_pair(pan, lrms, opts.ratio)?;
    if opts.kernel % 2 == 0 || opts.kernel < opts.ratio {
        return Err(Error::invalid(format!(
            "SFIM kernel {} must be odd and >= ratio {}",
            opts.kernel, opts.ratio
        )));
    }
    let (h, w) = (pan.height(), pan.width());
    let p = pan.band(0);
    let smooth = box_smooth(p, h, w, opts.kernel);
    let mut quotient = Vec::with_capacity(h * w);
    for (i, (&pv, &sv)) in p.iter().zip(&smooth).enumerate() {
        match opts.clamp {
            Some((lo, hi)) => quotient.push((pv / sv.max(opts.eps)).clamp(lo, hi)),
            None if sv < opts.eps => return Err(Error::DivisionGuard { pixel: i, value: sv }),
            None => quotient.push(pv / sv),
        }
    }
    let mut out = upsample(lrms, opts.ratio)?;
    for b in 0..out.bands() {
        out.band_mut(b).iter_mut().zip(&quotient).for_each(|(v, q)| *v *= q);
    }
    Ok(out)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn covariance(a: &[f64], ma: f64, b: &[f64], mb: f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / a.len() as f64
}

/// Gram-Schmidt detail injection with intensity `I = sum_b w_b MS_up_b`.
///
/// The detail is `s (PAN - mean PAN) - (I - mean I)` with `s = std I / std PAN`,
/// i.e. `PAN' - I` for the mean/std matched `PAN'`. When PAN equals I the
/// detail is exactly zero.
pub fn gram_schmidt(pan: &Raster, lrms: &Raster, opts: &GsOptions) -> Result<Raster> {
    check_pair(pan, lrms, opts.ratio)?;
    let bands = lrms.bands();
    let weights = match &opts.weights {
        Some(w) if w.len() != bands => return Err(Error::invalid(format!("{} GS weights for {bands} bands", w.len()))),
        Some(w) => w.clone(),
        None => vec![1.0 / bands as f64; bands],
    };
    let mut out = upsample(lrms, opts.ratio)?;
    let n = out.pixels();
    let mut intensity = vec![0.0; n];
    for (b, &wb) in weights.iter().enumerate() {
        intensity.iter_mut().zip(out.band(b)).for_each(|(i, v)| *i += wb * v);
    }
    let mi = mean(&intensity);
    let var_i = covariance(&intensity, mi, &intensity, mi);
    if !(var_i >= opts.eps) {
        return Err(Error::DegenerateIntensity(var_i));
    }
    let p = pan.band(0);
    let mp = mean(p);
    let var_p = covariance(p, mp, p, mp);
    let scale = if var_p > 0.0 { (var_i / var_p).sqrt() } else { 0.0 };
    let detail: Vec<f64> = p
        .iter()
        .zip(&intensity)
        .map(|(pv, iv)| scale * (pv - mp) - (iv - mi))
        .collect();
    for b in 0..bands {
        let band = out.band(b);
        let g = covariance(band, mean(band), &intensity, mi) / var_i;
        out.band_mut(b).iter_mut().zip(&detail).for_each(|(v, d)| *v += g * d);
    }
    Ok(out)
}
