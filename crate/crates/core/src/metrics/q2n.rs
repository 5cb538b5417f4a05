//! Universal image quality index Q and its hypercomplex generalisation Q2n.
//!
//! A pixel's B band values are read as one element of the 2^n-dimensional
//! Cayley-Dickson algebra (zero-padded when B is not a power of two). With
//! `d = x - mean(x)` and `e = y - mean(y)` over a block,
//!
//! ```text
//! cov  = mean(d * conj(e))          (hypercomplex)
//! Q2n  = 2|cov| / (var_x + var_y) * 2|mu_x||mu_y| / (|mu_x|^2 + |mu_y|^2)
//! ```
//!
//! For B = 1 this is |Q|.

use crate::error::{Error, Result};
use crate::raster::{ensure_same_dims, Raster};

pub const Q_BLOCK: usize = 32;

/// Cayley-Dickson product: `(p, q)(r, s) = (p r - conj(s) q, s p + q conj(r))`.
/// All slices have the same power-of-two length.
pub(crate) fn cd_mul(a: &[f64], b: &[f64], out: &mut [f64]) {
    let n = a.len();
    if n == 1 {
        out[0] = a[0] * b[0];
        return;
    }
    let h = n / 2;
    let (p, q) = a.split_at(h);
    let (r, s) = b.split_at(h);
    let mut t1 = vec![0.0; h];
    let mut t2 = vec![0.0; h];
    cd_mul(p, r, &mut t1);
    cd_mul(&cd_conj(s), q, &mut t2);
    for i in 0..h {
        out[i] = t1[i] - t2[i];
    }
    cd_mul(s, p, &mut t1);
    cd_mul(q, &cd_conj(r), &mut t2);
    for i in 0..h {
        out[h + i] = t1[i] + t2[i];
    }
}

pub(crate) fn cd_conj(a: &[f64]) -> Vec<f64> {
    let mut c: Vec<f64> = a.iter().map(|v| -v).collect();
    c[0] = a[0];
    c
}

fn modulus(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Block origins: non-overlapping `block`-sized windows stepped by `shift`;
/// a single whole-image window when the image is smaller than one block.
pub(crate) fn block_windows(h: usize, w: usize, block: usize, shift: usize) -> Vec<(usize, usize, usize, usize)> {
    if block == 0 || h < block || w < block {
        return vec![(0, 0, h, w)];
    }
    let shift = shift.max(1);
    let mut out = Vec::new();
    let mut y = 0;
    while y + block <= h {
        let mut x = 0;
        while x + block <= w {
            out.push((y, x, block, block));
            x += shift;
        }
        y += shift;
    }
    out
}

/// Q2n of one window given per-pixel hypercomplex values (`dim` each).
fn q2n_window(xs: &[f64], ys: &[f64], dim: usize) -> f64 {
    let count = xs.len() / dim;
    let mut mx = vec![0.0; dim];
    let mut my = vec![0.0; dim];
    for p in 0..count {
        for k in 0..dim {
            mx[k] += xs[p * dim + k];
            my[k] += ys[p * dim + k];
        }
    }
    mx.iter_mut().chain(my.iter_mut()).for_each(|v| *v /= count as f64);

    let mut cov = vec![0.0; dim];
    let (mut vx, mut vy) = (0.0, 0.0);
    let mut prod = vec![0.0; dim];
    let mut d = vec![0.0; dim];
    let mut e = vec![0.0; dim];
    for p in 0..count {
        for k in 0..dim {
            d[k] = xs[p * dim + k] - mx[k];
            e[k] = ys[p * dim + k] - my[k];
        }
        cd_mul(&d, &cd_conj(&e), &mut prod);
        cov.iter_mut().zip(&prod).for_each(|(c, v)| *c += v);
        // variances through the same product so identical inputs give
        // bit-identical terms
        cd_mul(&d, &cd_conj(&d), &mut prod);
        vx += prod[0];
        cd_mul(&e, &cd_conj(&e), &mut prod);
        vy += prod[0];
    }
    let n = count as f64;
    cov.iter_mut().for_each(|v| *v /= n);
    let (vx, vy) = (vx / n, vy / n);

    let structure = if vx + vy == 0.0 {
        1.0
    } else {
        2.0 * modulus(&cov) / (vx + vy)
    };
    let (ax, ay) = (modulus(&mx), modulus(&my));
    let luminance = if ax * ax + ay * ay == 0.0 {
        1.0
    } else {
        2.0 * ax * ay / (ax * ax + ay * ay)
    };
    structure * luminance
}

/// Per-block Q2n values.
pub fn q2n_blocks(x: &Raster, reference: &Raster, block: usize, shift: usize) -> Result<Vec<f64>> {
    ensure_same_dims("q2n", x, reference)?;
    if x.bands() == 0 || x.pixels() == 0 {
        return Err(Error::invalid("q2n of an empty raster"));
    }
    let dim = x.bands().next_power_of_two();
    let w = x.width();
    let mut out = Vec::new();
    for (y0, x0, bh, bw) in block_windows(x.height(), w, block, shift) {
        let mut xs = vec![0.0; bh * bw * dim];
        let mut ys = vec![0.0; bh * bw * dim];
        for yy in 0..bh {
            for xx in 0..bw {
                let p = yy * bw + xx;
                for b in 0..x.bands() {
                    xs[p * dim + b] = x.get(b, y0 + yy, x0 + xx);
                    ys[p * dim + b] = reference.get(b, y0 + yy, x0 + xx);
                }
            }
        }
        out.push(q2n_window(&xs, &ys, dim));
    }
    Ok(out)
}

/// Block-averaged Q2n (Q4 for four bands, Q8 for eight).
pub fn q2n(x: &Raster, reference: &Raster, block: usize, shift: usize) -> Result<f64> {
    let v = q2n_blocks(x, reference, block, shift)?;
    Ok(v.iter().sum::<f64>() / v.len() as f64)
}

/// Signed scalar Q of two equally sized planes.
pub fn q_index(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut cov, mut vx, mut vy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (d, e) = (a - mx, b - my);
        cov += d * e;
        vx += d * d;
        vy += e * e;
    }
    let structure = if vx + vy == 0.0 { 1.0 } else { 2.0 * cov / (vx + vy) };
    let luminance = if mx * mx + my * my == 0.0 {
        1.0
    } else {
        2.0 * mx * my / (mx * mx + my * my)
    };
    structure * luminance
}

/// Block-averaged signed Q between two single planes of size `h x w`.
pub fn q_index_blocks(x: &[f64], y: &[f64], h: usize, w: usize, block: usize) -> f64 {
    let windows = block_windows(h, w, block, block);
    let mut total = 0.0;
    let mut bx = Vec::new();
    let mut by = Vec::new();
    for &(y0, x0, bh, bw) in &windows {
        bx.clear();
        by.clear();
        for yy in y0..y0 + bh {
            bx.extend_from_slice(&x[yy * w + x0..yy * w + x0 + bw]);
            by.extend_from_slice(&y[yy * w + x0..yy * w + x0 + bw]);
        }
        total += q_index(&bx, &by);
    }
    total / windows.len() as f64
}
