//! UTF-8 `key=value` run configuration. Blank lines and lines starting with
//! `#` are ignored; unknown keys are errors.

use crate::classical::{GsOptions, SfimOptions};
use crate::error::{Error, Result};
use crate::metrics::Q_BLOCK;
use crate::train::TrainConfig;
use crate::wald::{SensorModel, SimConfig, DEFAULT_MS_GAIN, DEFAULT_PAN_GAIN};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub sim: SimConfig,
    /// One gain for every band, or one per band.
    pub ms_gains: Vec<f64>,
    pub pan_gain: f64,
    pub sfim: SfimOptions,
    pub gs: GsOptions,
    pub q_block: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            sim: SimConfig::default(),
            ms_gains: vec![DEFAULT_MS_GAIN],
            pan_gain: DEFAULT_PAN_GAIN,
            sfim: SfimOptions::default(),
            gs: GsOptions::default(),
            q_block: Q_BLOCK,
        }
    }
}

fn bad(key: &str, value: &str, expect: &str) -> Error {
    Error::parse("config", format!("{key}: expected {expect}, got {value:?}"))
}

fn num<T: std::str::FromStr>(key: &str, value: &str, expect: &str) -> Result<T> {
    value.parse().map_err(|_| bad(key, value, expect))
}

fn list(key: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|v| num(key, v.trim(), "comma-separated numbers"))
        .collect()
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse("config", format!("line {}: expected key=value", i + 1)))?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if let Some(k) = key.strip_prefix("model.") {
            if self.train.model.set(k, value)? {
                if k == "bands" {
                    self.sim.bands = self.train.model.bands;
                }
                return Ok(());
            }
        }
        let t = &mut self.train;
        match key {
            "train.iterations" => t.iterations = num(key, value, "integer")?,
            "train.batch_size" => t.batch_size = num(key, value, "integer")?,
            "train.lr" => t.adam.lr = num(key, value, "number")?,
            "train.beta1" => t.adam.beta1 = num(key, value, "number")?,
            "train.beta2" => t.adam.beta2 = num(key, value, "number")?,
            "train.eps" => t.adam.eps = num(key, value, "number")?,
            "train.seed" => t.seed = num(key, value, "integer")?,
            "train.budget" => {
                t.budget = if value == "none" {
                    None
                } else {
                    Some(num(key, value, "integer or none")?)
                }
            }
            "train.smoothing_window" => t.smoothing_window = num(key, value, "integer")?,
            "train.stop_below" => {
                t.stop_below = if value == "none" {
                    None
                } else {
                    Some(num(key, value, "number or none")?)
                }
            }
            "data.scenes" => self.sim.scenes = num(key, value, "integer")?,
            "data.scene_size" => self.sim.scene_size = num(key, value, "integer")?,
            "data.patch" => self.sim.patch = num(key, value, "integer")?,
            "data.stride" => self.sim.stride = num(key, value, "integer")?,
            "data.seed" => self.sim.seed = num(key, value, "integer")?,
            "data.prng" if value == "chacha8" => {}
            "data.prng" => return Err(bad(key, value, "chacha8")),
            "sensor.ms_gain" => self.ms_gains = list(key, value)?,
            "sensor.pan_gain" => self.pan_gain = num(key, value, "number")?,
            "sfim.kernel" => self.sfim.kernel = num(key, value, "integer")?,
            "sfim.eps" => self.sfim.eps = num(key, value, "number")?,
            "sfim.clamp" => {
                self.sfim.clamp = if value == "none" {
                    None
                } else {
                    match list(key, value)?.as_slice() {
                        &[lo, hi] if lo < hi => Some((lo, hi)),
                        _ => return Err(bad(key, value, "lo,hi with lo < hi, or none")),
                    }
                }
            }
            "gs.weights" => {
                self.gs.weights = if value == "uniform" {
                    None
                } else {
                    Some(list(key, value)?)
                }
            }
            "gs.eps" => self.gs.eps = num(key, value, "number")?,
            "metrics.q_block" => self.q_block = num(key, value, "integer")?,
            _ => return Err(Error::parse("config", format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Overrides both the training and the data seed.
    pub fn set_seed(&mut self, seed: u64) {
        self.train.seed = seed;
        self.sim.seed = seed;
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.sensor()?.validate()?;
        if self.q_block == 0 {
            return Err(Error::invalid("metrics.q_block must be positive"));
        }
        Ok(())
    }

    pub fn ratio(&self) -> usize {
        self.train.model.upsample_factor
    }

    pub fn sensor(&self) -> Result<SensorModel> {
        let bands = self.train.model.bands;
        let ms_gains = match self.ms_gains.as_slice() {
            &[g] => vec![g; bands],
            g if g.len() == bands => g.to_vec(),
            g => {
                return Err(Error::invalid(format!(
                    "sensor.ms_gain lists {} gains for {bands} bands",
                    g.len()
                )))
            }
        };
        Ok(SensorModel {
            ms_gains,
            pan_gain: self.pan_gain,
            ratio: self.ratio(),
        })
    }

    pub fn sim(&self) -> SimConfig {
        SimConfig {
            bands: self.train.model.bands,
            ..self.sim.clone()
        }
    }

    pub fn sfim(&self) -> SfimOptions {
        SfimOptions {
            ratio: self.ratio(),
            ..self.sfim.clone()
        }
    }

    pub fn gs(&self) -> GsOptions {
        GsOptions {
            ratio: self.ratio(),
            ..self.gs.clone()
        }
    }

    /// Every key with its current value, in a form [`RunConfig::parse`] accepts.
    pub fn to_text(&self) -> String {
        let t = &self.train;
        let opt = |v: Option<String>, none: &str| v.unwrap_or_else(|| none.to_string());
        let mut lines: Vec<(String, String)> = t
            .model
            .to_pairs()
            .into_iter()
            .map(|(k, v)| (format!("model.{k}"), v))
            .collect();
        lines.extend([
            ("train.iterations".into(), t.iterations.to_string()),
            ("train.batch_size".into(), t.batch_size.to_string()),
            ("train.lr".into(), t.adam.lr.to_string()),
            ("train.beta1".into(), t.adam.beta1.to_string()),
            ("train.beta2".into(), t.adam.beta2.to_string()),
            ("train.eps".into(), t.adam.eps.to_string()),
            ("train.seed".into(), t.seed.to_string()),
            ("train.budget".into(), opt(t.budget.map(|b| b.to_string()), "none")),
            ("train.smoothing_window".into(), t.smoothing_window.to_string()),
            (
                "train.stop_below".into(),
                opt(t.stop_below.map(|b| b.to_string()), "none"),
            ),
            ("data.scenes".into(), self.sim.scenes.to_string()),
            ("data.scene_size".into(), self.sim.scene_size.to_string()),
            ("data.patch".into(), self.sim.patch.to_string()),
            ("data.stride".into(), self.sim.stride.to_string()),
            ("data.seed".into(), self.sim.seed.to_string()),
            ("data.prng".into(), "chacha8".into()),
            ("sensor.ms_gain".into(), join(&self.ms_gains)),
            ("sensor.pan_gain".into(), self.pan_gain.to_string()),
            ("sfim.kernel".into(), self.sfim.kernel.to_string()),
            ("sfim.eps".into(), self.sfim.eps.to_string()),
            (
                "sfim.clamp".into(),
                opt(self.sfim.clamp.map(|(a, b)| format!("{a},{b}")), "none"),
            ),
            (
                "gs.weights".into(),
                opt(self.gs.weights.as_deref().map(join), "uniform"),
            ),
            ("gs.eps".into(), self.gs.eps.to_string()),
            ("metrics.q_block".into(), self.q_block.to_string()),
        ]);
        lines.into_iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }
}
