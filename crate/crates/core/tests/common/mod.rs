//! Brute-force reference implementations shared by the integration tests.
//!
//! Each oracle is written from the textbook definition with plain loops and
//! shares no code with the library beyond the `Raster` container.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sdrcnn_core::Raster;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_raster(r: &mut ChaCha8Rng, bands: usize, h: usize, w: usize, lo: f64, hi: f64) -> Raster {
    let data = (0..bands * h * w).map(|_| r.random_range(lo..hi)).collect();
    Raster::from_vec(bands, h, w, data).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn sam(x: &Raster, r: &Raster) -> f64 {
    let (bands, h, w) = x.dims();
    let mut sum = 0.0;
    for y in 0..h {
        for xx in 0..w {
            let u: Vec<f64> = (0..bands).map(|b| x.get(b, y, xx)).collect();
            let v: Vec<f64> = (0..bands).map(|b| r.get(b, y, xx)).collect();
            let dot: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
            let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
            let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if nu > 0.0 && nv > 0.0 {
                sum += (dot / (nu * nv)).clamp(-1.0, 1.0).acos();
            }
        }
    }
    (sum / (h * w) as f64) * 180.0 / std::f64::consts::PI
}

pub fn ergas(x: &Raster, r: &Raster, ratio: f64) -> f64 {
    let (bands, h, w) = x.dims();
    let n = (h * w) as f64;
    let mut acc = 0.0;
    for b in 0..bands {
        let mut se = 0.0;
        let mut mu = 0.0;
        for y in 0..h {
            for xx in 0..w {
                se += (x.get(b, y, xx) - r.get(b, y, xx)).powi(2);
                mu += r.get(b, y, xx);
            }
        }
        let rmse = (se / n).sqrt();
        mu /= n;
        acc += (rmse / mu).powi(2);
    }
    100.0 / ratio * (acc / bands as f64).sqrt()
}

/// Laplacian by explicit 3x3 correlation with zero padding.
fn high_pass(r: &Raster, b: usize) -> Vec<f64> {
    const K: [[f64; 3]; 3] = [[0.0, -1.0, 0.0], [-1.0, 4.0, -1.0], [0.0, -1.0, 0.0]];
    let (_, h, w) = r.dims();
    let mut out = Vec::with_capacity(h * w);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut acc = 0.0;
            for (i, row) in K.iter().enumerate() {
                for (j, k) in row.iter().enumerate() {
                    let (yy, xx) = (y + i as isize - 1, x + j as isize - 1);
                    if yy >= 0 && xx >= 0 && yy < h as isize && xx < w as isize {
                        acc += k * r.get(b, yy as usize, xx as usize);
                    }
                }
            }
            out.push(acc);
        }
    }
    out
}

/// Correlation via raw moments, a different route from centred sums.
fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (sa, sb) = (a.iter().sum::<f64>(), b.iter().sum::<f64>());
    let saa: f64 = a.iter().map(|v| v * v).sum();
    let sbb: f64 = b.iter().map(|v| v * v).sum();
    let sab: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let cov = sab / n - sa * sb / (n * n);
    let va = saa / n - sa * sa / (n * n);
    let vb = sbb / n - sb * sb / (n * n);
    cov / (va * vb).sqrt()
}

pub fn scc(x: &Raster, r: &Raster) -> f64 {
    let bands = x.bands();
    (0..bands)
        .map(|b| correlation(&high_pass(x, b), &high_pass(r, b)))
        .sum::<f64>()
        / bands as f64
}

/// Signed universal image quality index over one window of paired samples.
pub fn q_scalar(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / (n - 1.0);
    let sxx = x.iter().map(|a| (a - mx).powi(2)).sum::<f64>() / (n - 1.0);
    let syy = y.iter().map(|b| (b - my).powi(2)).sum::<f64>() / (n - 1.0);
    // the n-1 normalisation cancels in every ratio
    4.0 * sxy * mx * my / ((sxx + syy) * (mx * mx + my * my))
}

/// Hamilton product of quaternions `(w, i, j, k)`.
pub fn hamilton(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
    [
        a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
        a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
        a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
        a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0],
    ]
}

fn qconj(a: [f64; 4]) -> [f64; 4] {
    [a[0], -a[1], -a[2], -a[3]]
}

fn qnorm(a: [f64; 4]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Q4 of one window: pixels are quaternions built from four bands.
pub fn q4_window(x: &[[f64; 4]], y: &[[f64; 4]]) -> f64 {
    let n = x.len() as f64;
    let mut mx = [0.0; 4];
    let mut my = [0.0; 4];
    for (a, b) in x.iter().zip(y) {
        for k in 0..4 {
            mx[k] += a[k] / n;
            my[k] += b[k] / n;
        }
    }
    let mut cov = [0.0; 4];
    let (mut vx, mut vy) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let d: [f64; 4] = std::array::from_fn(|k| a[k] - mx[k]);
        let e: [f64; 4] = std::array::from_fn(|k| b[k] - my[k]);
        let p = hamilton(d, qconj(e));
        for k in 0..4 {
            cov[k] += p[k] / n;
        }
        vx += qnorm(d).powi(2) / n;
        vy += qnorm(e).powi(2) / n;
    }
    let (ax, ay) = (qnorm(mx), qnorm(my));
    4.0 * qnorm(cov) * ax * ay / ((vx + vy) * (ax * ax + ay * ay))
}

fn windows(h: usize, w: usize, block: usize) -> Vec<(usize, usize, usize, usize)> {
    if h < block || w < block {
        return vec![(0, 0, h, w)];
    }
    let mut v = Vec::new();
    for by in 0..h / block {
        for bx in 0..w / block {
            v.push((by * block, bx * block, block, block));
        }
    }
    v
}

/// Block-averaged |Q| (one band) or Q4 (four bands), non-overlapping blocks.
pub fn q2n(x: &Raster, r: &Raster, block: usize) -> f64 {
    let (bands, h, w) = x.dims();
    assert!(bands == 1 || bands == 4, "oracle covers B = 1 and B = 4");
    let ws = windows(h, w, block);
    let mut total = 0.0;
    for &(y0, x0, bh, bw) in &ws {
        if bands == 1 {
            let mut a = Vec::new();
            let mut b = Vec::new();
            for y in y0..y0 + bh {
                for xx in x0..x0 + bw {
                    a.push(x.get(0, y, xx));
                    b.push(r.get(0, y, xx));
                }
            }
            total += q_scalar(&a, &b).abs();
        } else {
            let mut a = Vec::new();
            let mut b = Vec::new();
            for y in y0..y0 + bh {
                for xx in x0..x0 + bw {
                    a.push(std::array::from_fn(|k| x.get(k, y, xx)));
                    b.push(std::array::from_fn(|k| r.get(k, y, xx)));
                }
            }
            total += q4_window(&a, &b);
        }
    }
    total / ws.len() as f64
}

/// Block-averaged signed Q between band `a` of `x` and band `b` of `y`.
pub fn q_bands(x: &Raster, a: usize, y: &Raster, b: usize, block: usize) -> f64 {
    let (_, h, w) = x.dims();
    let ws = windows(h, w, block);
    let mut total = 0.0;
    for &(y0, x0, bh, bw) in &ws {
        let mut u = Vec::new();
        let mut v = Vec::new();
        for yy in y0..y0 + bh {
            for xx in x0..x0 + bw {
                u.push(x.get(a, yy, xx));
                v.push(y.get(b, yy, xx));
            }
        }
        total += q_scalar(&u, &v);
    }
    total / ws.len() as f64
}

/// D_lambda with p = 1; the MS window is `block / ratio`.
pub fn d_lambda(fused: &Raster, ms: &Raster, block: usize) -> f64 {
    let bands = fused.bands();
    let ratio = fused.height() / ms.height();
    let mut acc = 0.0;
    let mut pairs = 0;
    for i in 0..bands {
        for j in 0..bands {
            if i != j {
                acc += (q_bands(fused, i, fused, j, block) - q_bands(ms, i, ms, j, block / ratio)).abs();
                pairs += 1;
            }
        }
    }
    acc / pairs as f64
}

/// D_s with q = 1 against a given low-pass PAN.
pub fn d_s(fused: &Raster, ms: &Raster, pan: &Raster, pan_low: &Raster, block: usize) -> f64 {
    let bands = fused.bands();
    let ratio = fused.height() / ms.height();
    let mut acc = 0.0;
    for i in 0..bands {
        acc += (q_bands(fused, i, pan, 0, block) - q_bands(ms, i, pan_low, 0, block / ratio)).abs();
    }
    acc / bands as f64
}

pub fn qnr(d_lambda: f64, d_s: f64) -> f64 {
    (1.0 - d_lambda) * (1.0 - d_s)
}

/// Trailing-window mean, recomputed from scratch for every index.
pub fn smooth(raw: &[f64], window: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(raw.len());
    for i in 0..raw.len() {
        let start = (i + 1).saturating_sub(window);
        let mut s = 0.0;
        for v in &raw[start..=i] {
            s += v;
        }
        out.push(s / (i + 1 - start) as f64);
    }
    out
}

/// Plain box mean with edge replication.
pub fn box_mean(plane: &[f64], h: usize, w: usize, k: usize) -> Vec<f64> {
    let half = (k / 2) as isize;
    let mut out = vec![0.0; h * w];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut s = 0.0;
            for dy in -half..=half {
                for dx in -half..=half {
                    let yy = (y + dy).clamp(0, h as isize - 1) as usize;
                    let xx = (x + dx).clamp(0, w as isize - 1) as usize;
                    s += plane[yy * w + xx];
                }
            }
            out[y as usize * w + x as usize] = s / (k * k) as f64;
        }
    }
    out
}

/// SFIM on an already upsampled MS, without clamping.
pub fn sfim(pan: &Raster, ms_up: &Raster, kernel: usize) -> Raster {
    let (bands, h, w) = ms_up.dims();
    let smooth = box_mean(pan.band(0), h, w, kernel);
    let mut out = ms_up.clone();
    for b in 0..bands {
        for (p, s) in smooth.iter().enumerate() {
            out.band_mut(b)[p] = ms_up.band(b)[p] * pan.band(0)[p] / s;
        }
    }
    out
}

/// Gram-Schmidt injection on an already upsampled MS with uniform weights.
pub fn gram_schmidt(pan: &Raster, ms_up: &Raster) -> Raster {
    let (bands, h, w) = ms_up.dims();
    let n = (h * w) as f64;
    let intensity: Vec<f64> = (0..h * w)
        .map(|p| (0..bands).map(|b| ms_up.band(b)[p]).sum::<f64>() / bands as f64)
        .collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / n;
    let cov = |a: &[f64], b: &[f64]| {
        let (ma, mb) = (mean(a), mean(b));
        a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / n
    };
    let p = pan.band(0);
    let (mi, mp) = (mean(&intensity), mean(p));
    let (si, sp) = (cov(&intensity, &intensity).sqrt(), cov(p, p).sqrt());
    // PAN matched to the intensity's mean and standard deviation
    let matched: Vec<f64> = p.iter().map(|v| (v - mp) * si / sp + mi).collect();
    let var_i = si * si;
    let mut out = ms_up.clone();
    for b in 0..bands {
        let g = cov(ms_up.band(b), &intensity) / var_i;
        for q in 0..h * w {
            out.band_mut(b)[q] = ms_up.band(b)[q] + g * (matched[q] - intensity[q]);
        }
    }
    out
}
