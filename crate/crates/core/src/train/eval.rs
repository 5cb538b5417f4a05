use std::fmt;

use crate::classical::{upsample, ClassicalMethod};
use crate::error::{Error, Result};
use crate::metrics::{ergas, q2n, sam, scc, FullResolution, Metric, MetricReport, Q_BLOCK};
use crate::model::SdrcnnParams;
use crate::raster::Raster;
use crate::wald::{SamplePair, SensorModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    /// SAM, ERGAS, SCC and Q2n against GT.
    Reduced,
    /// D_lambda, D_s and QNR against the input MS and PAN.
    Full,
}

impl EvalMode {
    pub fn name(self) -> &'static str {
        match self {
            EvalMode::Reduced => "reduced",
            EvalMode::Full => "full",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "reduced" => Some(EvalMode::Reduced),
            "full" => Some(EvalMode::Full),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Method<'a> {
    Sdrcnn(&'a SdrcnnParams),
    Classical(ClassicalMethod),
    Bicubic,
    /// GT itself; reduced mode only.
    Reference,
}

impl Method<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Sdrcnn(_) => "sdrcnn",
            Method::Classical(c) => c.name(),
            Method::Bicubic => "bicubic",
            Method::Reference => "reference",
        }
    }
}

impl fmt::Display for Method<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSettings {
    pub ratio: usize,
    pub q_block: usize,
    pub sensor: SensorModel,
}

impl EvalSettings {
    pub fn new(bands: usize) -> Self {
        let sensor = SensorModel::new(bands);
        Self {
            ratio: sensor.ratio,
            q_block: Q_BLOCK,
            sensor,
        }
    }
}

/// Fuses one PAN/LRMS pair.
pub fn fuse(method: &Method<'_>, pan: &Raster, lrms: &Raster, ratio: usize) -> Result<Raster> {
    match method {
        Method::Sdrcnn(p) => p.predict(pan, lrms),
        Method::Classical(c) => c.apply(pan, lrms),
        Method::Bicubic => upsample(lrms, ratio),
        Method::Reference => Err(Error::invalid("the reference method has no fusion step")),
    }
}

/// Scores `method` on every sample, in the given order.
pub fn evaluate(
    method: &Method<'_>,
    samples: &[SamplePair],
    mode: EvalMode,
    settings: &EvalSettings,
) -> Result<MetricReport> {
    let mut report = MetricReport::new(method.name());
    for s in samples {
        match mode {
            EvalMode::Reduced => {
                let fused = match method {
                    Method::Reference => s.gt.clone(),
                    _ => fuse(method, &s.pan, &s.lrms, settings.ratio)?,
                };
                report.push(&s.id, Metric::Sam, sam(&fused, &s.gt)?);
                report.push(&s.id, Metric::Ergas, ergas(&fused, &s.gt, settings.ratio as f64)?);
                report.push(&s.id, Metric::Scc, scc(&fused, &s.gt)?);
                report.push(
                    &s.id,
                    Metric::Q2n,
                    q2n(&fused, &s.gt, settings.q_block, settings.q_block)?,
                );
            }
            EvalMode::Full => {
                let fused = fuse(method, &s.pan, &s.lrms, settings.ratio)?;
                let fr = FullResolution::compute(&fused, &s.lrms, &s.pan, &settings.sensor)?;
                report.push(&s.id, Metric::DLambda, fr.d_lambda);
                report.push(&s.id, Metric::Ds, fr.d_s);
                report.push(&s.id, Metric::Qnr, fr.qnr);
            }
        }
    }
    Ok(report)
}
