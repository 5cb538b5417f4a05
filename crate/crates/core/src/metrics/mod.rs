//! Reduced-resolution quality indices (SAM, ERGAS, SCC, Q2n), the
//! no-reference triple (D_lambda, D_s, QNR) and absolute error maps.
//!
//! Conventions pinned here:
//! - SAM: pixels where either vector is zero contribute an angle of 0.
//! - SCC: high-pass is the zero-padded 3x3 Laplacian `[[0,-1,0],[-1,4,-1],[0,-1,0]]`;
//!   a band whose high-pass image is constant contributes correlation 0.
//! - Q / Q2n: 32x32 blocks with shift 32. A block where both inputs are
//!   constant has a contrast-correlation factor of 1; a block where both
//!   means vanish has a luminance factor of 1.
//! - D_lambda / D_s: exponents p = q = 1.

mod q2n;
mod qnr;
mod report;

pub use q2n::{q2n, q2n_blocks, q_index, q_index_blocks, Q_BLOCK};
pub use qnr::{d_lambda, d_s, d_s_with_lowpass, qnr, FullResolution};
pub use report::{aggregate, Metric, MetricReport, Summary};

use crate::error::{Error, Result};
use crate::raster::{ensure_same_dims, Raster};

/// Mean spectral angle in degrees.
pub fn sam(x: &Raster, reference: &Raster) -> Result<f64> {
    ensure_same_dims("sam", x, reference)?;
    let (bands, n) = (x.bands(), x.pixels());
    if n == 0 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for p in 0..n {
        let (mut dot, mut nx, mut nr) = (0.0, 0.0, 0.0);
        for b in 0..bands {
            let (u, v) = (x.data()[b * n + p], reference.data()[b * n + p]);
            dot += u * v;
            nx += u * u;
            nr += v * v;
        }
        let denom = (nx * nr).sqrt();
        if denom > 0.0 {
            total += (dot / denom).clamp(-1.0, 1.0).acos();
        }
    }
    Ok((total / n as f64).to_degrees())
}

fn band_mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Relative dimensionless global error in synthesis.
pub fn ergas(x: &Raster, reference: &Raster, ratio: f64) -> Result<f64> {
    ensure_same_dims("ergas", x, reference)?;
    if !(ratio > 0.0) {
        return Err(Error::invalid("ERGAS ratio must be positive"));
    }
    let mut acc = 0.0;
    for b in 0..x.bands() {
        let (xb, rb) = (x.band(b), reference.band(b));
        let mean = band_mean(rb);
        if mean == 0.0 {
            return Err(Error::DegenerateReferenceBand { band: b });
        }
        let mse = xb.iter().zip(rb).map(|(a, r)| (a - r) * (a - r)).sum::<f64>() / xb.len() as f64;
        acc += mse / (mean * mean);
    }
    Ok(100.0 / ratio * (acc / x.bands() as f64).sqrt())
}

/// Zero-padded 3x3 Laplacian of one plane.
pub fn laplacian(plane: &[f64], h: usize, w: usize) -> Vec<f64> {
    let at = |y: isize, x: isize| {
        if y < 0 || x < 0 || y >= h as isize || x >= w as isize {
            0.0
        } else {
            plane[y as usize * w + x as usize]
        }
    };
    let mut out = vec![0.0; h * w];
    for y in 0..h as isize {
        for x in 0..w as isize {
            out[y as usize * w + x as usize] =
                4.0 * at(y, x) - at(y - 1, x) - at(y + 1, x) - at(y, x - 1) - at(y, x + 1);
        }
    }
    out
}

/// Pearson correlation; 0 when either input is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (band_mean(a), band_mean(b));
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        cov += dx * dy;
        va += dx * dx;
        vb += dy * dy;
    }
    if va == 0.0 || vb == 0.0 {
        return 0.0;
    }
    cov / (va * vb).sqrt()
}

/// Spatial correlation coefficient: band-averaged correlation of
/// Laplacian-filtered images.
pub fn scc(x: &Raster, reference: &Raster) -> Result<f64> {
    ensure_same_dims("scc", x, reference)?;
    let (h, w) = (x.height(), x.width());
    let mut total = 0.0;
    for b in 0..x.bands() {
        let hx = laplacian(x.band(b), h, w);
        let hr = laplacian(reference.band(b), h, w);
        total += pearson(&hx, &hr);
    }
    Ok(total / x.bands() as f64)
}

/// Per-pixel mean over bands of `|fused - gt|`, as a one-band raster.
pub fn aem(fused: &Raster, gt: &Raster) -> Result<Raster> {
    ensure_same_dims("aem", fused, gt)?;
    let n = fused.pixels();
    let mut out = vec![0.0; n];
    for b in 0..fused.bands() {
        for (o, (f, g)) in out.iter_mut().zip(fused.band(b).iter().zip(gt.band(b))) {
            *o += (f - g).abs();
        }
    }
    let bands = fused.bands() as f64;
    out.iter_mut().for_each(|v| *v /= bands);
    Raster::from_vec(1, fused.height(), fused.width(), out)
}
