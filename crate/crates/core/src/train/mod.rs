//! Training loop, loss smoothing, evaluation and the ablation harness.

mod ablation;
mod eval;
mod manifest;

pub use ablation::{ablation_variants, run_ablation, AblationRun, BUDGET_TARGETS};
pub use eval::{evaluate, fuse, EvalMode, EvalSettings, Method};
pub use manifest::{git_blob_hash, RunManifest};

use log::{debug, info};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{budget_width_for, Mode, SdrcnnConfig, SdrcnnParams};
use crate::tensor::{AdamConfig, OptimizerState, Tape, Tensor4};
use crate::wald::SamplePair;

pub const DEFAULT_SMOOTHING_WINDOW: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub model: SdrcnnConfig,
    pub iterations: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    /// Parameter budget; when set, `model.width` is replaced by the largest
    /// width that fits.
    pub budget: Option<usize>,
    pub smoothing_window: usize,
    /// Stop once an iteration's loss falls below this fraction of the first
    /// iteration's loss.
    pub stop_below: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            model: SdrcnnConfig::default(),
            iterations: 5000,
            batch_size: 4,
            adam: AdamConfig::default(),
            seed: 0,
            budget: None,
            smoothing_window: DEFAULT_SMOOTHING_WINDOW,
            stop_below: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be >= 1"));
        }
        if self.smoothing_window == 0 {
            return Err(Error::invalid("smoothing window must be >= 1"));
        }
        if !(self.adam.lr >= 0.0) {
            return Err(Error::invalid("learning rate must be >= 0"));
        }
        Ok(())
    }

    /// Model configuration after applying the budget.
    pub fn resolved_model(&self) -> Result<SdrcnnConfig> {
        let mut m = self.model;
        if let Some(t) = self.budget {
            m.width = budget_width_for(t, &m)?;
        }
        m.validate()?;
        Ok(m)
    }
}

/// Trailing-window mean: `out[i]` averages `raw[i+1-min(i+1, window) ..= i]`.
pub fn smooth_loss(raw: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    (0..raw.len())
        .map(|i| {
            let n = (i + 1).min(window);
            raw[i + 1 - n..=i].iter().sum::<f64>() / n as f64
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossLog {
    pub raw: Vec<f64>,
    pub window: usize,
}

impl LossLog {
    pub fn new(window: usize) -> Self {
        Self {
            raw: Vec::new(),
            window,
        }
    }

    pub fn smoothed(&self) -> Vec<f64> {
        smooth_loss(&self.raw, self.window)
    }

    /// CSV with columns `iteration,loss,smoothed`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["iteration", "loss", "smoothed"])?;
        for (i, (r, s)) in self.raw.iter().zip(self.smoothed()).enumerate() {
            w.write_record([i.to_string(), format!("{r:?}"), format!("{s:?}")])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationRecord {
    pub epoch: usize,
    /// Iterations completed when validation ran.
    pub iteration: usize,
    pub loss: f64,
}

#[derive(Debug, Clone)]
pub struct BestCheckpoint {
    pub epoch: usize,
    pub iteration: usize,
    pub val_loss: f64,
    pub params: SdrcnnParams,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: SdrcnnParams,
    pub log: LossLog,
    pub validation: Vec<ValidationRecord>,
    pub best: Option<BestCheckpoint>,
}

/// Stacks the samples at `idx` into `(pan, lrms, gt)` batch tensors.
pub fn stack_batch(samples: &[SamplePair], idx: &[usize]) -> Result<(Tensor4, Tensor4, Tensor4)> {
    let first = samples
        .get(*idx.first().ok_or_else(|| Error::invalid("empty batch"))?)
        .ok_or_else(|| Error::invalid("batch index out of range"))?;
    let stack = |get: &dyn Fn(&SamplePair) -> &crate::raster::Raster| -> Result<Tensor4> {
        let (c, h, w) = get(first).dims();
        let mut data = Vec::with_capacity(idx.len() * c * h * w);
        for &i in idx {
            let r = get(&samples[i]);
            if r.dims() != (c, h, w) {
                return Err(Error::invalid(format!(
                    "sample {} has dims {:?}, batch expects {:?}",
                    samples[i].id,
                    r.dims(),
                    (c, h, w)
                )));
            }
            data.extend_from_slice(r.data());
        }
        Tensor4::from_vec([idx.len(), c, h, w], data)
    };
    Ok((stack(&|s| &s.pan)?, stack(&|s| &s.lrms)?, stack(&|s| &s.gt)?))
}

/// Mean L1 of the inference-mode prediction over `samples`.
pub fn mean_l1(params: &SdrcnnParams, samples: &[SamplePair], batch: usize) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::invalid("no samples to evaluate"));
    }
    let idx: Vec<usize> = (0..samples.len()).collect();
    let mut total = 0.0;
    for chunk in idx.chunks(batch.max(1)) {
        let (pan, lrms, gt) = stack_batch(samples, chunk)?;
        let pred = params.predict_tensor(&pan, &lrms)?;
        total += crate::tensor::l1_loss(&pred, &gt)? * chunk.len() as f64;
    }
    Ok(total / samples.len() as f64)
}

/// Minimizes the L1 loss between the network output and GT over `train`.
///
/// One epoch is one shuffled pass over `train`; the validation loss is
/// computed after every complete epoch and the best-scoring parameters are
/// kept. Runs are bit-reproducible for a fixed seed.
pub fn train(cfg: &TrainConfig, train: &[SamplePair], val: &[SamplePair]) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::invalid("training split is empty"));
    }
    let model = cfg.resolved_model()?;
    let params = SdrcnnParams::init(model, cfg.seed)?;
    train_from(cfg, params, train, val)
}

/// Like [`train`] but starting from the given parameters.
pub fn train_from(
    cfg: &TrainConfig,
    mut params: SdrcnnParams,
    train: &[SamplePair],
    val: &[SamplePair],
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::invalid("training split is empty"));
    }
    let mut opt = OptimizerState::new(cfg.adam, params.store());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut log = LossLog::new(cfg.smoothing_window);
    let mut validation = Vec::new();
    let mut best: Option<BestCheckpoint> = None;
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut epoch = 0;
    let mut iteration = 0;
    info!(
        "training {} parameters on {} samples for up to {} iterations",
        crate::model::param_count(params.config())?,
        train.len(),
        cfg.iterations
    );
    'outer: while iteration < cfg.iterations {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            if iteration >= cfg.iterations {
                break 'outer;
            }
            // sorted so a batch's summation order does not depend on the shuffle
            let mut batch = chunk.to_vec();
            batch.sort_unstable();
            let (pan, lrms, gt) = stack_batch(train, &batch)?;
            let mut tape = Tape::new();
            let p = tape.input(pan, false);
            let l = tape.input(lrms, false);
            let t = tape.input(gt, false);
            let (vars, stats) = params.record(&mut tape, p, l, Mode::Train)?;
            let loss_var = tape.l1_loss(vars.hrms, t)?;
            let loss = tape.value(loss_var).data()[0];
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { iteration, value: loss });
            }
            let grads = tape.backward(loss_var)?;
            let store = params.store_mut();
            store.zero_grads();
            store.accumulate(&tape, &grads);
            opt.step(store)?;
            params.apply_bn_stats(&stats);
            log.raw.push(loss);
            debug!("iteration {iteration}: loss {loss:.6e}");
            iteration += 1;
            if let Some(frac) = cfg.stop_below {
                if loss < frac * log.raw[0] {
                    info!("loss {loss:.4e} below {frac} x initial after {iteration} iterations");
                    break 'outer;
                }
            }
        }
        epoch += 1;
        if !val.is_empty() {
            let v = mean_l1(&params, val, cfg.batch_size)?;
            info!("epoch {epoch} ({iteration} iterations): validation L1 {v:.6e}");
            validation.push(ValidationRecord {
                epoch,
                iteration,
                loss: v,
            });
            if best.as_ref().is_none_or(|b| v < b.val_loss) {
                best = Some(BestCheckpoint {
                    epoch,
                    iteration,
                    val_loss: v,
                    params: params.clone(),
                });
            }
        }
    }
    Ok(TrainOutcome {
        params,
        log,
        validation,
        best,
    })
}
