//! Reduced-resolution data under Wald's protocol: MTF-shaped Gaussian blur,
//! decimation, patch extraction, seeded splits and a synthetic scene
//! generator for desk-scale experiments.

use std::f64::consts::PI;

use log::warn;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::raster::Raster;

pub const MTF_TAPS: usize = 41;
pub const DEFAULT_MS_GAIN: f64 = 0.30;
pub const DEFAULT_PAN_GAIN: f64 = 0.15;
pub const DEFAULT_RATIO: usize = 4;

/// Sensor degradation model: per-band MTF gains at the Nyquist frequency of
/// the low-resolution grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorModel {
    pub ms_gains: Vec<f64>,
    pub pan_gain: f64,
    pub ratio: usize,
}

impl SensorModel {
    pub fn new(bands: usize) -> Self {
        Self {
            ms_gains: vec![DEFAULT_MS_GAIN; bands],
            pan_gain: DEFAULT_PAN_GAIN,
            ratio: DEFAULT_RATIO,
        }
    }

    pub fn bands(&self) -> usize {
        self.ms_gains.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.ratio < 2 {
            return Err(Error::invalid(format!(
                "resolution ratio must be >= 2, got {}",
                self.ratio
            )));
        }
        for &g in self.ms_gains.iter().chain(std::iter::once(&self.pan_gain)) {
            check_gain(g)?;
        }
        Ok(())
    }

    /// Blur with the MS MTFs then decimate.
    pub fn degrade_ms(&self, ms: &Raster) -> Result<Raster> {
        if ms.bands() != self.bands() {
            return Err(Error::invalid(format!(
                "sensor has {} MS gains, image has {} bands",
                self.bands(),
                ms.bands()
            )));
        }
        decimate(&mtf_blur_bands(ms, &self.ms_gains, self.ratio)?, self.ratio)
    }

    /// Blur with the PAN MTF then decimate.
    pub fn degrade_pan(&self, pan: &Raster) -> Result<Raster> {
        decimate(&mtf_blur(pan, self.pan_gain, self.ratio)?, self.ratio)
    }
}

fn check_gain(g: f64) -> Result<()> {
    if g > 0.0 && g < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("MTF gain must lie in (0, 1), got {g}")))
    }
}

/// Gaussian width whose transfer function `exp(-2 pi^2 sigma^2 f^2)` equals
/// `gain` at `f = 1 / (2 ratio)` cycles per pixel.
pub fn mtf_sigma(gain: f64, ratio: usize) -> Result<f64> {
    check_gain(gain)?;
    Ok(ratio as f64 * (-2.0 * gain.ln()).sqrt() / PI)
}

/// Normalized, symmetric 1-D kernel of `MTF_TAPS` taps. The 2-D blur is its
/// outer product with itself.
pub fn mtf_kernel(gain: f64, ratio: usize) -> Result<Vec<f64>> {
    let sigma = mtf_sigma(gain, ratio)?;
    let half = (MTF_TAPS / 2) as isize;
    let mut k: Vec<f64> = (-half..=half)
        .map(|n| (-(n * n) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    // enforce exact symmetry after normalization
    for i in 0..MTF_TAPS / 2 {
        k[MTF_TAPS - 1 - i] = k[i];
    }
    Ok(k)
}

/// Magnitude of the kernel's DTFT at the low-resolution Nyquist frequency.
pub fn nyquist_response(kernel: &[f64], ratio: usize) -> f64 {
    let f = 1.0 / (2.0 * ratio as f64);
    let half = (kernel.len() / 2) as f64;
    let (mut re, mut im) = (0.0, 0.0);
    for (i, &k) in kernel.iter().enumerate() {
        let phase = 2.0 * PI * f * (i as f64 - half);
        re += k * phase.cos();
        im -= k * phase.sin();
    }
    (re * re + im * im).sqrt()
}

/// Separable correlation with edge replication.
fn blur_plane(plane: &[f64], h: usize, w: usize, k: &[f64]) -> Vec<f64> {
    let half = (k.len() / 2) as isize;
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let mut tmp = vec![0.0; h * w];
    for y in 0..h {
        let row = &plane[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (t, &kv) in k.iter().enumerate() {
                acc += kv * row[clamp(x as isize + t as isize - half, w)];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for (t, &kv) in k.iter().enumerate() {
            let src = clamp(y as isize + t as isize - half, h) * w;
            for x in 0..w {
                out[y * w + x] += kv * tmp[src + x];
            }
        }
    }
    out
}

/// Blurs every band with the same MTF gain.
pub fn mtf_blur(img: &Raster, gain: f64, ratio: usize) -> Result<Raster> {
    mtf_blur_bands(img, &vec![gain; img.bands()], ratio)
}

/// Blurs band `b` with `gains[b]`.
pub fn mtf_blur_bands(img: &Raster, gains: &[f64], ratio: usize) -> Result<Raster> {
    if gains.len() != img.bands() {
        return Err(Error::invalid("one MTF gain per band required"));
    }
    let (h, w) = (img.height(), img.width());
    let mut out = Raster::zeros(img.bands(), h, w);
    for (b, &g) in gains.iter().enumerate() {
        let k = mtf_kernel(g, ratio)?;
        out.band_mut(b).copy_from_slice(&blur_plane(img.band(b), h, w, &k));
    }
    Ok(out)
}

/// Keeps every `factor`-th pixel starting at offset 0.
pub fn decimate(img: &Raster, factor: usize) -> Result<Raster> {
    let (h, w) = (img.height(), img.width());
    if factor == 0 || h % factor != 0 || w % factor != 0 {
        return Err(Error::invalid(format!("cannot decimate {h}x{w} by {factor}")));
    }
    let (oh, ow) = (h / factor, w / factor);
    let mut out = Raster::zeros(img.bands(), oh, ow);
    for b in 0..img.bands() {
        let src = img.band(b);
        let dst = out.band_mut(b);
        for y in 0..oh {
            for x in 0..ow {
                dst[y * ow + x] = src[y * factor * w + x * factor];
            }
        }
    }
    Ok(out)
}

/// Min-max mapping to [0, 1]; a constant image maps to 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    pub min: f64,
    pub max: f64,
}

impl Normalization {
    pub fn fit(r: &Raster) -> Self {
        let (min, max) = r.min_max();
        Self { min, max }
    }

    pub fn identity() -> Self {
        Self { min: 0.0, max: 1.0 }
    }

    pub fn apply(&self, r: &Raster) -> Raster {
        let span = self.max - self.min;
        if span > 0.0 {
            r.map(|v| (v - self.min) / span)
        } else {
            r.map(|_| 0.0)
        }
    }

    pub fn invert(&self, r: &Raster) -> Raster {
        let span = self.max - self.min;
        r.map(|v| self.min + v * span)
    }
}

/// One reduced-resolution record.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePair {
    pub id: String,
    pub pan: Raster,
    pub lrms: Raster,
    pub gt: Raster,
    /// Scene-level mapping applied to the MS roles (GT, LRMS).
    pub ms_norm: Normalization,
    pub pan_norm: Normalization,
}

/// Patch origins along one axis.
pub fn patch_origins(size: usize, patch: usize, stride: usize) -> Vec<usize> {
    if patch == 0 || stride == 0 || size < patch {
        return Vec::new();
    }
    (0..=(size - patch) / stride).map(|i| i * stride).collect()
}

/// Tiles a scene into Wald-protocol samples. `ms_scene` is the original MS
/// (it becomes the GT); `pan_scene` is `ratio` times larger. Both scenes are
/// min-max normalized before patching.
pub fn make_samples(
    scene_id: &str,
    ms_scene: &Raster,
    pan_scene: &Raster,
    patch: usize,
    stride: usize,
    sensor: &SensorModel,
) -> Result<Vec<SamplePair>> {
    sensor.validate()?;
    let r = sensor.ratio;
    if pan_scene.bands() != 1 {
        return Err(Error::invalid("PAN scene must have one band"));
    }
    if pan_scene.height() != r * ms_scene.height() || pan_scene.width() != r * ms_scene.width() {
        return Err(Error::invalid(format!(
            "PAN scene {}x{} is not {r}x the MS scene {}x{}",
            pan_scene.height(),
            pan_scene.width(),
            ms_scene.height(),
            ms_scene.width()
        )));
    }
    if patch == 0 || patch % r != 0 || stride == 0 {
        return Err(Error::invalid(format!(
            "patch {patch} must be a positive multiple of {r} and stride positive"
        )));
    }
    let ys = patch_origins(ms_scene.height(), patch, stride);
    let xs = patch_origins(ms_scene.width(), patch, stride);
    if ys.is_empty() || xs.is_empty() {
        warn!(
            "scene {scene_id} ({}x{}) is smaller than one {patch}x{patch} patch; no samples",
            ms_scene.height(),
            ms_scene.width()
        );
        return Ok(Vec::new());
    }
    let ms_norm = Normalization::fit(ms_scene);
    let pan_norm = Normalization::fit(pan_scene);
    let ms = ms_norm.apply(ms_scene);
    let pan = pan_norm.apply(pan_scene);
    let mut out = Vec::with_capacity(ys.len() * xs.len());
    for &y in &ys {
        for &x in &xs {
            let gt = ms.crop(y, x, patch, patch)?;
            let lrms = sensor.degrade_ms(&gt)?;
            let pan_patch = pan.crop(y * r, x * r, patch * r, patch * r)?;
            let pan_in = sensor.degrade_pan(&pan_patch)?;
            out.push(SamplePair {
                id: format!("{scene_id}_y{y}_x{x}"),
                pan: pan_in,
                lrms,
                gt,
                ms_norm,
                pan_norm,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSplit {
    pub seed: u64,
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitRole {
    Train,
    Val,
    Test,
}

impl SplitRole {
    pub fn name(self) -> &'static str {
        match self {
            SplitRole::Train => "train",
            SplitRole::Val => "val",
            SplitRole::Test => "test",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "train" => Some(SplitRole::Train),
            "val" => Some(SplitRole::Val),
            "test" => Some(SplitRole::Test),
            _ => None,
        }
    }
}

impl DatasetSplit {
    pub fn role_of(&self, id: &str) -> Option<SplitRole> {
        let has = |v: &Vec<String>| v.iter().any(|x| x == id);
        if has(&self.train) {
            Some(SplitRole::Train)
        } else if has(&self.val) {
            Some(SplitRole::Val)
        } else if has(&self.test) {
            Some(SplitRole::Test)
        } else {
            None
        }
    }

    pub fn ids(&self, role: SplitRole) -> &[String] {
        match role {
            SplitRole::Train => &self.train,
            SplitRole::Val => &self.val,
            SplitRole::Test => &self.test,
        }
    }
}

/// Seeded ChaCha8 shuffle, then round(0.7 n) train, round(0.2 n) val and the
/// remainder test.
pub fn split(ids: &[String], seed: u64) -> DatasetSplit {
    let mut shuffled = ids.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n = ids.len();
    let n_train = ((0.7 * n as f64).round() as usize).min(n);
    let n_val = ((0.2 * n as f64).round() as usize).min(n - n_train);
    let test = shuffled.split_off(n_train + n_val);
    let val = shuffled.split_off(n_train);
    DatasetSplit {
        seed,
        train: shuffled,
        val,
        test,
    }
}

/// Fixed positive PAN weights over the bands, summing to one.
pub fn pan_weights(bands: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..bands).map(|b| 1.0 + 0.5 * (b as f64 * 0.9).sin().abs()).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

/// Procedural scene: an MS image of `size x size` and a PAN four times larger.
///
/// Content is drawn on the PAN grid: a smooth background, rectangles and disks
/// filled with smooth spectra, and faint band-correlated texture. PAN is a
/// fixed weighted band sum plus a small independent detail layer; MS is the
/// same content degraded with the default MS MTF. All values lie in [0, 1].
pub fn synth_scene(seed: u64, size: usize, bands: usize) -> Result<(Raster, Raster)> {
    if size == 0 || bands == 0 {
        return Err(Error::invalid("scene size and band count must be positive"));
    }
    let r = DEFAULT_RATIO;
    let hi = size * r;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let spectrum = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        let (c, a) = (rng.random_range(0.2..0.8), rng.random_range(0.05..0.2));
        let (f, phi) = (rng.random_range(0.3..1.5), rng.random_range(0.0..2.0 * PI));
        (0..bands)
            .map(|b| (c + a * (2.0 * PI * f * b as f64 / bands as f64 + phi).sin()).clamp(0.05, 0.95))
            .collect()
    };

    let bg = spectrum(&mut rng);
    let (gx, gy) = (rng.random_range(-0.15..0.15), rng.random_range(-0.15..0.15));
    let mut img = vec![0.0; bands * hi * hi];
    for b in 0..bands {
        for y in 0..hi {
            for x in 0..hi {
                img[(b * hi + y) * hi + x] =
                    bg[b] + gx * (x as f64 / hi as f64 - 0.5) + gy * (y as f64 / hi as f64 - 0.5);
            }
        }
    }

    let n_obj = (size * size / 128).max(8);
    for _ in 0..n_obj {
        let spec = spectrum(&mut rng);
        let (cy, cx) = (
            rng.random_range(0.0..1.0) * hi as f64,
            rng.random_range(0.0..1.0) * hi as f64,
        );
        let ry = rng.random_range(0.03..0.15) * hi as f64;
        let rx = rng.random_range(0.03..0.15) * hi as f64;
        let disk = rng.random_bool(0.5);
        let y0 = (cy - ry).floor().max(0.0) as usize;
        let y1 = ((cy + ry).ceil() as usize).min(hi);
        let x0 = (cx - rx).floor().max(0.0) as usize;
        let x1 = ((cx + rx).ceil() as usize).min(hi);
        for y in y0..y1 {
            for x in x0..x1 {
                let (dy, dx) = ((y as f64 + 0.5 - cy) / ry, (x as f64 + 0.5 - cx) / rx);
                let inside = if disk {
                    dy * dy + dx * dx <= 1.0
                } else {
                    dy.abs() <= 1.0 && dx.abs() <= 1.0
                };
                if inside {
                    for b in 0..bands {
                        img[(b * hi + y) * hi + x] = spec[b];
                    }
                }
            }
        }
    }

    let waves: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                rng.random_range(1.0..hi as f64 / 8.0) / hi as f64,
                rng.random_range(1.0..hi as f64 / 8.0) / hi as f64,
                rng.random_range(0.0..2.0 * PI),
            )
        })
        .collect();
    for y in 0..hi {
        for x in 0..hi {
            let t: f64 = waves
                .iter()
                .map(|&(fy, fx, p)| (2.0 * PI * (fy * y as f64 + fx * x as f64) + p).sin())
                .sum::<f64>()
                * 0.01;
            for b in 0..bands {
                let v = &mut img[(b * hi + y) * hi + x];
                *v = (*v + t * (0.7 + 0.6 * b as f64 / bands as f64)).clamp(0.0, 1.0);
            }
        }
    }
    let hires = Raster::from_vec(bands, hi, hi, img)?;

    let w = pan_weights(bands);
    let mut pan = vec![0.0; hi * hi];
    for (p, v) in pan.iter_mut().enumerate() {
        let s: f64 = (0..bands).map(|b| w[b] * hires.band(b)[p]).sum();
        *v = (s + rng.random_range(-0.01..0.01)).clamp(0.0, 1.0);
    }
    let pan = Raster::from_vec(1, hi, hi, pan)?;
    let ms = SensorModel::new(bands).degrade_ms(&hires)?;
    Ok((ms, pan))
}

/// Synthetic dataset settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub scenes: usize,
    /// MS scene side length; the PAN scene is `ratio` times larger.
    pub scene_size: usize,
    pub patch: usize,
    pub stride: usize,
    pub bands: usize,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            scenes: 4,
            scene_size: 256,
            patch: 64,
            stride: 64,
            bands: 8,
            seed: 0,
        }
    }
}

/// Generates scenes with per-scene seeds `seed + index`, tiles them and splits
/// the sample ids with `seed`.
pub fn simulate(cfg: &SimConfig, sensor: &SensorModel) -> Result<(Vec<SamplePair>, DatasetSplit)> {
    let mut samples = Vec::new();
    for i in 0..cfg.scenes {
        let (ms, pan) = synth_scene(cfg.seed.wrapping_add(i as u64), cfg.scene_size, cfg.bands)?;
        samples.extend(make_samples(
            &format!("s{i:03}"),
            &ms,
            &pan,
            cfg.patch,
            cfg.stride,
            sensor,
        )?);
    }
    let ids: Vec<String> = samples.iter().map(|s| s.id.clone()).collect();
    let split = split(&ids, cfg.seed);
    Ok((samples, split))
}
