use super::Tensor4;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvKind {
    /// 1x1 cross-channel mixing.
    Pointwise,
    /// One spatial kernel per channel, stride 1, same padding.
    Depthwise,
}

/// Convolution weights with per-output-channel bias.
///
/// Pointwise weights are stored `(out, in, 1, 1)`; depthwise weights are
/// stored `(channels, 1, kh, kw)`. The bias is `(1, out, 1, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvWeights {
    kind: ConvKind,
    weight: Tensor4,
    bias: Tensor4,
}

impl ConvWeights {
    pub fn pointwise(out_channels: usize, in_channels: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        let weight = Tensor4::from_vec([out_channels, in_channels, 1, 1], weights)?;
        let bias = Tensor4::from_vec([1, out_channels, 1, 1], bias)?;
        Self::from_tensors(ConvKind::Pointwise, weight, bias)
    }

    pub fn depthwise(channels: usize, kernel: (usize, usize), weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        let weight = Tensor4::from_vec([channels, 1, kernel.0, kernel.1], weights)?;
        let bias = Tensor4::from_vec([1, channels, 1, 1], bias)?;
        Self::from_tensors(ConvKind::Depthwise, weight, bias)
    }

    pub fn from_tensors(kind: ConvKind, weight: Tensor4, bias: Tensor4) -> Result<Self> {
        check_conv_params(kind, &weight, &bias)?;
        Ok(Self { kind, weight, bias })
    }

    pub fn kind(&self) -> ConvKind {
        self.kind
    }

    pub fn out_channels(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        match self.kind {
            ConvKind::Pointwise => self.weight.shape()[1],
            ConvKind::Depthwise => self.weight.shape()[0],
        }
    }

    pub fn kernel(&self) -> (usize, usize) {
        (self.weight.shape()[2], self.weight.shape()[3])
    }

    pub fn weight(&self) -> &Tensor4 {
        &self.weight
    }

    pub fn weight_mut(&mut self) -> &mut Tensor4 {
        &mut self.weight
    }

    pub fn bias(&self) -> &Tensor4 {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut Tensor4 {
        &mut self.bias
    }
}

fn check_conv_params(kind: ConvKind, weight: &Tensor4, bias: &Tensor4) -> Result<()> {
    let [o, c, kh, kw] = weight.shape();
    match kind {
        ConvKind::Pointwise if kh != 1 || kw != 1 => {
            return Err(Error::invalid(format!("pointwise kernel must be 1x1, got {kh}x{kw}")))
        }
        ConvKind::Depthwise if c != 1 => {
            return Err(Error::invalid(format!(
                "depthwise weight must be (channels, 1, kh, kw), got {:?}",
                weight.shape()
            )))
        }
        ConvKind::Depthwise if kh % 2 == 0 || kw % 2 == 0 => {
            return Err(Error::invalid(format!("depthwise kernel must be odd, got {kh}x{kw}")))
        }
        _ => {}
    }
    if bias.shape() != [1, o, 1, 1] {
        return Err(Error::ShapeMismatch {
            op: "conv bias",
            left: bias.shape(),
            right: [1, o, 1, 1],
        });
    }
    Ok(())
}

pub fn conv_pointwise(x: &Tensor4, w: &ConvWeights) -> Result<Tensor4> {
    if w.kind != ConvKind::Pointwise {
        return Err(Error::invalid("conv_pointwise needs pointwise weights"));
    }
    pointwise_forward(x, &w.weight, &w.bias)
}

pub fn conv_depthwise(x: &Tensor4, w: &ConvWeights) -> Result<Tensor4> {
    if w.kind != ConvKind::Depthwise {
        return Err(Error::invalid("conv_depthwise needs depthwise weights"));
    }
    depthwise_forward(x, &w.weight, &w.bias)
}

// ---------------------------------------------------------------------------
// Pointwise: per sample, Y (O x P) = W (O x C) * X (C x P) + b.

fn pointwise_dims(x: &Tensor4, weight: &Tensor4) -> Result<(usize, usize, usize, usize)> {
    let [n, c, h, w] = x.shape();
    let [o, wc, kh, kw] = weight.shape();
    if wc != c || kh != 1 || kw != 1 {
        return Err(Error::ShapeMismatch {
            op: "conv_pointwise",
            left: x.shape(),
            right: weight.shape(),
        });
    }
    Ok((n, c, o, h * w))
}

pub(crate) fn pointwise_forward(x: &Tensor4, weight: &Tensor4, bias: &Tensor4) -> Result<Tensor4> {
    let (n, c, o, p) = pointwise_dims(x, weight)?;
    check_conv_params(ConvKind::Pointwise, weight, bias)?;
    let [_, _, h, w] = x.shape();
    let mut out = Tensor4::zeros([n, o, h, w]);
    let bias = bias.data();
    for s in 0..n {
        let xs = &x.data()[s * c * p..(s + 1) * c * p];
        let ys = &mut out.data_mut()[s * o * p..(s + 1) * o * p];
        for (oc, row) in ys.chunks_exact_mut(p.max(1)).enumerate() {
            row.iter_mut().for_each(|v| *v = bias[oc]);
        }
        if p == 0 || c == 0 || o == 0 {
            continue;
        }
        // SAFETY: slice lengths match the (m, k, n) extents and strides below.
        unsafe {
            matrixmultiply::dgemm(
                o,
                c,
                p,
                1.0,
                weight.data().as_ptr(),
                c as isize,
                1,
                xs.as_ptr(),
                p as isize,
                1,
                1.0,
                ys.as_mut_ptr(),
                p as isize,
                1,
            );
        }
    }
    Ok(out)
}

/// Returns `(grad_x, grad_weight, grad_bias)`.
pub(crate) fn pointwise_backward(
    x: &Tensor4,
    weight: &Tensor4,
    grad_out: &Tensor4,
    need_input_grad: bool,
) -> Result<(Option<Tensor4>, Tensor4, Tensor4)> {
    let (n, c, o, p) = pointwise_dims(x, weight)?;
    let mut gw = Tensor4::zeros(weight.shape());
    let mut gb = Tensor4::zeros([1, o, 1, 1]);
    let mut gx = need_input_grad.then(|| Tensor4::zeros(x.shape()));
    if p == 0 || c == 0 || o == 0 {
        return Ok((gx, gw, gb));
    }
    for s in 0..n {
        let xs = &x.data()[s * c * p..(s + 1) * c * p];
        let gys = &grad_out.data()[s * o * p..(s + 1) * o * p];
        for (oc, row) in gys.chunks_exact(p).enumerate() {
            gb.data_mut()[oc] += row.iter().sum::<f64>();
        }
        // SAFETY: extents and strides describe gY (O x P), X^T (P x C), gW (O x C).
        unsafe {
            matrixmultiply::dgemm(
                o,
                p,
                c,
                1.0,
                gys.as_ptr(),
                p as isize,
                1,
                xs.as_ptr(),
                1,
                p as isize,
                1.0,
                gw.data_mut().as_mut_ptr(),
                c as isize,
                1,
            );
        }
        if let Some(gx) = gx.as_mut() {
            let gxs = &mut gx.data_mut()[s * c * p..(s + 1) * c * p];
            // SAFETY: W^T (C x O) via swapped strides, gY (O x P), gX (C x P).
            unsafe {
                matrixmultiply::dgemm(
                    c,
                    o,
                    p,
                    1.0,
                    weight.data().as_ptr(),
                    1,
                    c as isize,
                    gys.as_ptr(),
                    p as isize,
                    1,
                    0.0,
                    gxs.as_mut_ptr(),
                    p as isize,
                    1,
                );
            }
        }
    }
    Ok((gx, gw, gb))
}

// ---------------------------------------------------------------------------
// Depthwise, stride 1, zero "same" padding.

fn depthwise_dims(x: &Tensor4, weight: &Tensor4) -> Result<(usize, usize)> {
    let [_, c, h, w] = x.shape();
    let [wc, one, kh, kw] = weight.shape();
    if wc != c || one != 1 {
        return Err(Error::ShapeMismatch {
            op: "conv_depthwise",
            left: x.shape(),
            right: weight.shape(),
        });
    }
    if kh % 2 == 0 || kw % 2 == 0 {
        return Err(Error::invalid(format!("depthwise kernel must be odd, got {kh}x{kw}")));
    }
    if kh > h + 2 * (kh / 2) || kw > w + 2 * (kw / 2) {
        return Err(Error::invalid(format!(
            "kernel {kh}x{kw} larger than padded input {h}x{w}"
        )));
    }
    Ok((kh, kw))
}

/// Valid output range along one axis for tap offset `d`.
#[inline]
fn tap_range(len: usize, d: isize) -> (usize, usize) {
    let lo = (-d).max(0) as usize;
    let hi = (len as isize - d).clamp(0, len as isize) as usize;
    (lo.min(hi), hi)
}

pub(crate) fn depthwise_forward(x: &Tensor4, weight: &Tensor4, bias: &Tensor4) -> Result<Tensor4> {
    let (kh, kw) = depthwise_dims(x, weight)?;
    check_conv_params(ConvKind::Depthwise, weight, bias)?;
    let [n, c, h, w] = x.shape();
    let (ph, pw) = ((kh / 2) as isize, (kw / 2) as isize);
    let plane = h * w;
    let mut out = Tensor4::zeros(x.shape());
    for s in 0..n {
        for ch in 0..c {
            let off = (s * c + ch) * plane;
            let xs = &x.data()[off..off + plane];
            let ys = &mut out.data_mut()[off..off + plane];
            ys.iter_mut().for_each(|v| *v = bias.data()[ch]);
            let kern = &weight.data()[ch * kh * kw..(ch + 1) * kh * kw];
            for ki in 0..kh {
                let di = ki as isize - ph;
                let (ilo, ihi) = tap_range(h, di);
                for kj in 0..kw {
                    let dj = kj as isize - pw;
                    let (jlo, jhi) = tap_range(w, dj);
                    let wv = kern[ki * kw + kj];
                    for i in ilo..ihi {
                        let src = ((i as isize + di) as usize) * w;
                        let dst = &mut ys[i * w + jlo..i * w + jhi];
                        let srow = &xs[(src as isize + jlo as isize + dj) as usize..];
                        for (d, &sv) in dst.iter_mut().zip(srow) {
                            *d += wv * sv;
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

pub(crate) fn depthwise_backward(
    x: &Tensor4,
    weight: &Tensor4,
    grad_out: &Tensor4,
    need_input_grad: bool,
) -> Result<(Option<Tensor4>, Tensor4, Tensor4)> {
    let (kh, kw) = depthwise_dims(x, weight)?;
    let [n, c, h, w] = x.shape();
    let (ph, pw) = ((kh / 2) as isize, (kw / 2) as isize);
    let plane = h * w;
    let mut gw = Tensor4::zeros(weight.shape());
    let mut gb = Tensor4::zeros([1, c, 1, 1]);
    let mut gx = need_input_grad.then(|| Tensor4::zeros(x.shape()));
    for s in 0..n {
        for ch in 0..c {
            let off = (s * c + ch) * plane;
            let xs = &x.data()[off..off + plane];
            let gys = &grad_out.data()[off..off + plane];
            gb.data_mut()[ch] += gys.iter().sum::<f64>();
            let kern = &weight.data()[ch * kh * kw..(ch + 1) * kh * kw];
            for ki in 0..kh {
                let di = ki as isize - ph;
                let (ilo, ihi) = tap_range(h, di);
                for kj in 0..kw {
                    let dj = kj as isize - pw;
                    let (jlo, jhi) = tap_range(w, dj);
                    let wv = kern[ki * kw + kj];
                    let mut acc = 0.0;
                    for i in ilo..ihi {
                        let src = ((i as isize + di) * w as isize + jlo as isize + dj) as usize;
                        let g = &gys[i * w + jlo..i * w + jhi];
                        let xv = &xs[src..src + (jhi - jlo)];
                        acc += g.iter().zip(xv).map(|(a, b)| a * b).sum::<f64>();
                        if let Some(gx) = gx.as_mut() {
                            let gxs = &mut gx.data_mut()[off + src..off + src + (jhi - jlo)];
                            for (d, &gv) in gxs.iter_mut().zip(g) {
                                *d += wv * gv;
                            }
                        }
                    }
                    gw.data_mut()[ch * kh * kw + ki * kw + kj] += acc;
                }
            }
        }
    }
    Ok((gx, gw, gb))
}

// ---------------------------------------------------------------------------
// Elementwise and structural ops.

pub fn relu(x: &Tensor4) -> Tensor4 {
    let data = x.data().iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect();
    Tensor4::from_vec(x.shape(), data).expect("same length")
}

pub(crate) fn relu_backward(x: &Tensor4, grad_out: &Tensor4) -> Tensor4 {
    let data = x
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&v, &g)| if v > 0.0 { g } else { 0.0 })
        .collect();
    Tensor4::from_vec(x.shape(), data).expect("same length")
}

pub fn add(x: &Tensor4, y: &Tensor4) -> Result<Tensor4> {
    x.ensure_shape("add", y)?;
    let data = x.data().iter().zip(y.data()).map(|(a, b)| a + b).collect();
    Tensor4::from_vec(x.shape(), data)
}

/// Stacks tensors along the channel axis in argument order.
pub fn concat_channels(xs: &[&Tensor4]) -> Result<Tensor4> {
    let first = xs
        .first()
        .ok_or_else(|| Error::invalid("concat_channels needs at least one tensor"))?;
    let [n, _, h, w] = first.shape();
    let mut total_c = 0;
    for t in xs {
        let [tn, tc, th, tw] = t.shape();
        if tn != n || th != h || tw != w {
            return Err(Error::ShapeMismatch {
                op: "concat_channels",
                left: first.shape(),
                right: t.shape(),
            });
        }
        total_c += tc;
    }
    let plane = h * w;
    let mut data = Vec::with_capacity(n * total_c * plane);
    for s in 0..n {
        for t in xs {
            let len = t.channels() * plane;
            data.extend_from_slice(&t.data()[s * len..(s + 1) * len]);
        }
    }
    Tensor4::from_vec([n, total_c, h, w], data)
}

/// Inverse of [`concat_channels`]: cuts `x` into pieces of the given channel counts.
pub fn split_channels(x: &Tensor4, sizes: &[usize]) -> Result<Vec<Tensor4>> {
    let [n, c, h, w] = x.shape();
    if sizes.iter().sum::<usize>() != c {
        return Err(Error::invalid(format!(
            "split sizes {sizes:?} do not sum to {c} channels"
        )));
    }
    let plane = h * w;
    let mut parts: Vec<Vec<f64>> = sizes.iter().map(|&k| Vec::with_capacity(n * k * plane)).collect();
    for s in 0..n {
        let mut ch = 0;
        for (part, &k) in parts.iter_mut().zip(sizes) {
            let start = (s * c + ch) * plane;
            part.extend_from_slice(&x.data()[start..start + k * plane]);
            ch += k;
        }
    }
    parts
        .into_iter()
        .zip(sizes)
        .map(|(d, &k)| Tensor4::from_vec([n, k, h, w], d))
        .collect()
}

/// Mean absolute difference.
pub fn l1_loss(pred: &Tensor4, target: &Tensor4) -> Result<f64> {
    pred.ensure_shape("l1_loss", target)?;
    if pred.is_empty() {
        return Err(Error::invalid("l1_loss of empty tensors"));
    }
    let sum: f64 = pred.data().iter().zip(target.data()).map(|(a, b)| (a - b).abs()).sum();
    Ok(sum / pred.len() as f64)
}

pub(crate) fn l1_backward(pred: &Tensor4, target: &Tensor4, upstream: f64) -> Tensor4 {
    let scale = upstream / pred.len() as f64;
    let data = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(a, b)| {
            let d = a - b;
            if d > 0.0 {
                scale
            } else if d < 0.0 {
                -scale
            } else {
                0.0
            }
        })
        .collect();
    Tensor4::from_vec(pred.shape(), data).expect("same length")
}

// ---------------------------------------------------------------------------
// Per-channel batch normalization, used only by the ablation variants.

/// Saved forward quantities for the training-mode backward pass.
#[derive(Debug, Clone)]
pub struct BatchNormCache {
    pub normalized: Tensor4,
    pub inv_std: Vec<f64>,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

fn bn_check(x: &Tensor4, gamma: &Tensor4, beta: &Tensor4) -> Result<()> {
    let c = x.channels();
    for p in [gamma, beta] {
        if p.shape() != [1, c, 1, 1] {
            return Err(Error::ShapeMismatch {
                op: "batch_norm",
                left: x.shape(),
                right: p.shape(),
            });
        }
    }
    Ok(())
}

/// Normalizes with batch statistics (biased variance).
pub fn batch_norm_train(x: &Tensor4, gamma: &Tensor4, beta: &Tensor4, eps: f64) -> Result<(Tensor4, BatchNormCache)> {
    bn_check(x, gamma, beta)?;
    let [n, c, _, _] = x.shape();
    let plane = x.plane();
    let count = (n * plane) as f64;
    let mut mean = vec![0.0; c];
    let mut var = vec![0.0; c];
    for ch in 0..c {
        let mut s = 0.0;
        for b in 0..n {
            let off = (b * c + ch) * plane;
            s += x.data()[off..off + plane].iter().sum::<f64>();
        }
        let m = s / count;
        let mut v = 0.0;
        for b in 0..n {
            let off = (b * c + ch) * plane;
            v += x.data()[off..off + plane]
                .iter()
                .map(|&t| (t - m) * (t - m))
                .sum::<f64>();
        }
        mean[ch] = m;
        var[ch] = v / count;
    }
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
    let mut normalized = Tensor4::zeros(x.shape());
    let mut out = Tensor4::zeros(x.shape());
    for b in 0..n {
        for ch in 0..c {
            let off = (b * c + ch) * plane;
            let (g, be) = (gamma.data()[ch], beta.data()[ch]);
            for i in off..off + plane {
                let xh = (x.data()[i] - mean[ch]) * inv_std[ch];
                normalized.data_mut()[i] = xh;
                out.data_mut()[i] = g * xh + be;
            }
        }
    }
    Ok((
        out,
        BatchNormCache {
            normalized,
            inv_std,
            mean,
            var,
        },
    ))
}

/// Normalizes with frozen running statistics.
pub fn batch_norm_eval(
    x: &Tensor4,
    gamma: &Tensor4,
    beta: &Tensor4,
    running_mean: &[f64],
    running_var: &[f64],
    eps: f64,
) -> Result<Tensor4> {
    bn_check(x, gamma, beta)?;
    let [n, c, _, _] = x.shape();
    if running_mean.len() != c || running_var.len() != c {
        return Err(Error::invalid("running statistics length differs from channel count"));
    }
    let plane = x.plane();
    let mut out = Tensor4::zeros(x.shape());
    for b in 0..n {
        for ch in 0..c {
            let off = (b * c + ch) * plane;
            let inv = 1.0 / (running_var[ch] + eps).sqrt();
            let (g, be, m) = (gamma.data()[ch], beta.data()[ch], running_mean[ch]);
            for i in off..off + plane {
                out.data_mut()[i] = g * (x.data()[i] - m) * inv + be;
            }
        }
    }
    Ok(out)
}

/// Returns `(grad_x, grad_gamma, grad_beta)`.
pub(crate) fn batch_norm_backward_train(
    cache: &BatchNormCache,
    gamma: &Tensor4,
    grad_out: &Tensor4,
) -> (Tensor4, Tensor4, Tensor4) {
    let [n, c, _, _] = grad_out.shape();
    let plane = grad_out.plane();
    let count = (n * plane) as f64;
    let mut gg = Tensor4::zeros([1, c, 1, 1]);
    let mut gbeta = Tensor4::zeros([1, c, 1, 1]);
    let mut gx = Tensor4::zeros(grad_out.shape());
    for ch in 0..c {
        let (mut sum_g, mut sum_gx) = (0.0, 0.0);
        for b in 0..n {
            let off = (b * c + ch) * plane;
            for i in off..off + plane {
                let g = grad_out.data()[i];
                sum_g += g;
                sum_gx += g * cache.normalized.data()[i];
            }
        }
        gbeta.data_mut()[ch] = sum_g;
        gg.data_mut()[ch] = sum_gx;
        let k = gamma.data()[ch] * cache.inv_std[ch] / count;
        for b in 0..n {
            let off = (b * c + ch) * plane;
            for i in off..off + plane {
                let g = grad_out.data()[i];
                gx.data_mut()[i] = k * (count * g - sum_g - cache.normalized.data()[i] * sum_gx);
            }
        }
    }
    (gx, gg, gbeta)
}

pub(crate) fn batch_norm_backward_eval(
    x: &Tensor4,
    gamma: &Tensor4,
    running_mean: &[f64],
    running_var: &[f64],
    eps: f64,
    grad_out: &Tensor4,
) -> (Tensor4, Tensor4, Tensor4) {
    let [n, c, _, _] = x.shape();
    let plane = x.plane();
    let mut gg = Tensor4::zeros([1, c, 1, 1]);
    let mut gbeta = Tensor4::zeros([1, c, 1, 1]);
    let mut gx = Tensor4::zeros(x.shape());
    for b in 0..n {
        for ch in 0..c {
            let off = (b * c + ch) * plane;
            let inv = 1.0 / (running_var[ch] + eps).sqrt();
            for i in off..off + plane {
                let g = grad_out.data()[i];
                gbeta.data_mut()[ch] += g;
                gg.data_mut()[ch] += g * (x.data()[i] - running_mean[ch]) * inv;
                gx.data_mut()[i] = g * gamma.data()[ch] * inv;
            }
        }
    }
    (gx, gg, gbeta)
}
