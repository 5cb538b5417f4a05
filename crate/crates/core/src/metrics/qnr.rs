use super::q2n::{q_index_blocks, Q_BLOCK};
use crate::error::{Error, Result};
use crate::raster::Raster;
use crate::wald::SensorModel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FullResolution {
    pub d_lambda: f64,
    pub d_s: f64,
    pub qnr: f64,
}

/// Window size on the coarser grid so both windows cover the same ground.
fn low_block(high: &Raster, low: &Raster, block: usize) -> usize {
    let ratio = high.height() / low.height().max(1);
    (block / ratio.max(1)).max(1)
}

fn q_band_pair(r: &Raster, a: usize, b: usize, block: usize) -> f64 {
    q_index_blocks(r.band(a), r.band(b), r.height(), r.width(), block)
}

/// Spectral distortion: mean over ordered band pairs of the change in
/// inter-band Q between the fused image and the original MS.
pub fn d_lambda(fused: &Raster, ms: &Raster) -> Result<f64> {
    let bands = fused.bands();
    if bands < 2 {
        return Err(Error::invalid("D_lambda needs at least two bands"));
    }
    if ms.bands() != bands {
        return Err(Error::invalid("fused and MS band counts differ"));
    }
    let lb = low_block(fused, ms, Q_BLOCK);
    let mut acc = 0.0;
    for b in 0..bands {
        for c in 0..bands {
            if b == c {
                continue;
            }
            let qf = q_band_pair(fused, b, c, Q_BLOCK);
            let qm = q_band_pair(ms, b, c, lb);
            acc += (qf - qm).abs();
        }
    }
    Ok(acc / (bands * (bands - 1)) as f64)
}

/// Spatial distortion against an explicitly supplied low-pass PAN at MS scale.
pub fn d_s_with_lowpass(fused: &Raster, ms: &Raster, pan: &Raster, pan_low: &Raster) -> Result<f64> {
    if pan.bands() != 1 || pan_low.bands() != 1 {
        return Err(Error::invalid("PAN must have one band"));
    }
    if pan.height() != fused.height() || pan.width() != fused.width() {
        return Err(Error::invalid("PAN and fused image sizes differ"));
    }
    if pan_low.height() != ms.height() || pan_low.width() != ms.width() {
        return Err(Error::invalid("degraded PAN and MS sizes differ"));
    }
    if ms.bands() != fused.bands() {
        return Err(Error::invalid("fused and MS band counts differ"));
    }
    let lb = low_block(fused, ms, Q_BLOCK);
    let mut acc = 0.0;
    for b in 0..fused.bands() {
        let qh = q_index_blocks(fused.band(b), pan.band(0), fused.height(), fused.width(), Q_BLOCK);
        let ql = q_index_blocks(ms.band(b), pan_low.band(0), ms.height(), ms.width(), lb);
        acc += (qh - ql).abs();
    }
    Ok(acc / fused.bands() as f64)
}

/// Spatial distortion, degrading PAN with the sensor's PAN MTF.
pub fn d_s(fused: &Raster, ms: &Raster, pan: &Raster, sensor: &SensorModel) -> Result<f64> {
    let pan_low = sensor.degrade_pan(pan)?;
    d_s_with_lowpass(fused, ms, pan, &pan_low)
}

pub fn qnr(d_lambda: f64, d_s: f64) -> f64 {
    (1.0 - d_lambda) * (1.0 - d_s)
}

impl FullResolution {
    pub fn compute(fused: &Raster, ms: &Raster, pan: &Raster, sensor: &SensorModel) -> Result<Self> {
        let dl = d_lambda(fused, ms)?;
        let ds = d_s(fused, ms, pan, sensor)?;
        Ok(Self {
            d_lambda: dl,
            d_s: ds,
            qnr: qnr(dl, ds),
        })
    }
}
