//! Separable cubic-convolution upsampling (Keys kernel, a = -0.5).
//!
//! Low-resolution sample `j` sits on high-resolution pixel `j * factor`, which
//! makes the upsampler the exact right inverse of offset-0 decimation.
//! Borders replicate the edge sample.

use super::Tensor4;
use crate::error::{Error, Result};

const KEYS_A: f64 = -0.5;

fn keys(t: f64) -> f64 {
    let t = t.abs();
    if t <= 1.0 {
        ((KEYS_A + 2.0) * t - (KEYS_A + 3.0)) * t * t + 1.0
    } else if t < 2.0 {
        ((KEYS_A * t - 5.0 * KEYS_A) * t + 8.0 * KEYS_A) * t - 4.0 * KEYS_A
    } else {
        0.0
    }
}

/// Taps for one output position: the centre sample plus three neighbours
/// weighted against it, `out = x[c] + sum_k w_k (x[k] - x[c])`. This form
/// reproduces constants bit-exactly.
#[derive(Debug, Clone, Copy)]
struct Taps {
    center: usize,
    others: [usize; 3],
    weights: [f64; 3],
}

fn taps(len: usize, factor: usize) -> Vec<Taps> {
    let clamp = |i: isize| i.clamp(0, len as isize - 1) as usize;
    (0..len * factor)
        .map(|i| {
            let base = (i / factor) as isize;
            let t = (i % factor) as f64 / factor as f64;
            Taps {
                center: clamp(base),
                others: [clamp(base - 1), clamp(base + 1), clamp(base + 2)],
                weights: [keys(1.0 + t), keys(1.0 - t), keys(2.0 - t)],
            }
        })
        .collect()
}

#[inline]
fn interp(src: &[f64], stride: usize, tp: &Taps) -> f64 {
    let c = src[tp.center * stride];
    let mut v = c;
    for k in 0..3 {
        v += tp.weights[k] * (src[tp.others[k] * stride] - c);
    }
    v
}

pub fn upsample_bicubic(x: &Tensor4, factor: usize) -> Result<Tensor4> {
    if factor == 0 {
        return Err(Error::invalid("upsample factor must be >= 1"));
    }
    let [n, c, h, w] = x.shape();
    if factor == 1 {
        return Ok(x.detached());
    }
    if h == 0 || w == 0 {
        return Ok(Tensor4::zeros([n, c, h * factor, w * factor]));
    }
    let (oh, ow) = (h * factor, w * factor);
    let row_taps = taps(w, factor);
    let col_taps = taps(h, factor);
    let mut out = Tensor4::zeros([n, c, oh, ow]);
    let mut wide = vec![0.0; h * ow];
    for plane in 0..n * c {
        let src = &x.data()[plane * h * w..(plane + 1) * h * w];
        for y in 0..h {
            let row = &src[y * w..(y + 1) * w];
            for (j, tp) in row_taps.iter().enumerate() {
                wide[y * ow + j] = interp(row, 1, tp);
            }
        }
        let dst = &mut out.data_mut()[plane * oh * ow..(plane + 1) * oh * ow];
        for (i, tp) in col_taps.iter().enumerate() {
            for j in 0..ow {
                dst[i * ow + j] = interp(&wide[j..], ow, tp);
            }
        }
    }
    Ok(out)
}

#[inline]
fn scatter(dst: &mut [f64], stride: usize, tp: &Taps, g: f64) {
    let mut center = g;
    for k in 0..3 {
        let wg = tp.weights[k] * g;
        dst[tp.others[k] * stride] += wg;
        center -= wg;
    }
    dst[tp.center * stride] += center;
}

/// Transpose of [`upsample_bicubic`]: maps an output-sized gradient back to
/// the input grid.
pub(crate) fn upsample_bicubic_adjoint(grad_out: &Tensor4, in_shape: [usize; 4], factor: usize) -> Tensor4 {
    let [n, c, h, w] = in_shape;
    if factor == 1 {
        return grad_out.detached();
    }
    let mut gx = Tensor4::zeros(in_shape);
    if h == 0 || w == 0 {
        return gx;
    }
    let (oh, ow) = (h * factor, w * factor);
    let row_taps = taps(w, factor);
    let col_taps = taps(h, factor);
    let mut wide = vec![0.0; h * ow];
    for plane in 0..n * c {
        wide.iter_mut().for_each(|v| *v = 0.0);
        let g = &grad_out.data()[plane * oh * ow..(plane + 1) * oh * ow];
        for (i, tp) in col_taps.iter().enumerate() {
            for j in 0..ow {
                scatter(&mut wide[j..], ow, tp, g[i * ow + j]);
            }
        }
        let dst = &mut gx.data_mut()[plane * h * w..(plane + 1) * h * w];
        for y in 0..h {
            let row = &mut dst[y * w..(y + 1) * w];
            for (j, tp) in row_taps.iter().enumerate() {
                scatter(row, 1, tp, wide[y * ow + j]);
            }
        }
    }
    gx
}
