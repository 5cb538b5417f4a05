//! The single-branch dense-residual pansharpening network.
//!
//! ```text
//! I_S   = [PAN | up(LRMS)]                      (B+1 channels)
//! F_S   = stem(I_S)                             (width channels)
//! A_0   = F_S
//! I_R^i = A_{i-1},  F_R^i = I_R^i + block_i(I_R^i),  A_i = A_{i-1} + F_R^i
//! HRMS  = fuse([A_1 | ... | A_n]) + up(LRMS)
//! ```
//!
//! Every block is depthwise kxk -> 1x1 expand -> ReLU -> 1x1 project. The
//! stem changes the channel count and therefore has no skip.

mod budget;
mod checkpoint;
mod config;

pub use budget::{budget_width, budget_width_for, enumerate_param_count, param_count};
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use config::{SdrcnnConfig, Variant, DEFAULT_EXPANSION, DEFAULT_WIDTH};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::raster::Raster;
use crate::tensor::{ParamId, ParamStore, Tape, Tensor4, Var};

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics for BN; running statistics are reported for update.
    Train,
    /// Frozen running statistics for BN.
    Eval,
}

#[derive(Debug, Clone, Copy)]
struct ConvIds {
    weight: ParamId,
    bias: ParamId,
}

#[derive(Debug, Clone, Copy)]
struct BnIds {
    gamma: ParamId,
    beta: ParamId,
    running_mean: ParamId,
    running_var: ParamId,
}

#[derive(Debug, Clone, Copy)]
struct BlockIds {
    depthwise: ConvIds,
    expand: ConvIds,
    project: ConvIds,
    /// One per convolution when batch norm is enabled.
    bn: Option<[BnIds; 3]>,
}

/// All learnable weights, addressable by hierarchical name through
/// [`SdrcnnParams::store`].
#[derive(Debug, Clone)]
pub struct SdrcnnParams {
    config: SdrcnnConfig,
    store: ParamStore,
    stem: BlockIds,
    residual: Vec<BlockIds>,
    fusion: ConvIds,
}

/// Values of every named quantity in the dense forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// I_S
    pub input: Tensor4,
    /// F_S
    pub stem_out: Tensor4,
    /// I_R^i
    pub residual_inputs: Vec<Tensor4>,
    /// F_R^i
    pub residual_outputs: Vec<Tensor4>,
    /// A_i, the Addition Layer outputs
    pub additions: Vec<Tensor4>,
    pub concat: Tensor4,
    pub residual_image: Tensor4,
    pub upsampled: Tensor4,
    pub hrms: Tensor4,
}

/// Tape handles for the same quantities as [`ForwardTrace`].
#[derive(Debug, Clone)]
pub struct ForwardVars {
    pub input: Var,
    pub stem_out: Var,
    pub residual_inputs: Vec<Var>,
    pub residual_outputs: Vec<Var>,
    pub additions: Vec<Var>,
    pub concat: Var,
    pub residual_image: Var,
    pub upsampled: Var,
    pub hrms: Var,
}

/// Output of a single block, with the post-ReLU hidden map.
#[derive(Debug, Clone)]
pub struct BlockOutput {
    pub hidden: Tensor4,
    pub output: Tensor4,
}

/// Batch statistics produced in [`Mode::Train`], to be folded into the
/// running estimates.
#[derive(Debug, Clone, Default)]
pub struct BnStats(Vec<(ParamId, ParamId, Vec<f64>, Vec<f64>)>);

impl BnStats {
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `[PAN | up(LRMS)]` for a batch: PAN first, then the MS bands in order.
pub fn build_input(pan: &Tensor4, lrms: &Tensor4, factor: usize) -> Result<Tensor4> {
    check_pair(pan, lrms, factor)?;
    let up = crate::tensor::upsample_bicubic(lrms, factor)?;
    crate::tensor::concat_channels(&[pan, &up])
}

/// Single-image convenience wrapper over [`build_input`].
pub fn build_input_raster(pan: &Raster, lrms: &Raster, factor: usize) -> Result<Tensor4> {
    if pan.bands() != 1 {
        return Err(Error::invalid(format!("PAN must have one band, got {}", pan.bands())));
    }
    build_input(&pan.to_tensor(), &lrms.to_tensor(), factor)
}

fn check_pair(pan: &Tensor4, lrms: &Tensor4, factor: usize) -> Result<()> {
    let [pn, pc, ph, pw] = pan.shape();
    let [ln, _, lh, lw] = lrms.shape();
    if pc != 1 || pn != ln || ph != lh * factor || pw != lw * factor {
        return Err(Error::invalid(format!(
            "PAN {:?} must be {factor}x the LRMS {:?} with one channel",
            pan.shape(),
            lrms.shape()
        )));
    }
    Ok(())
}

impl SdrcnnParams {
    /// All weights and biases zero; BN scale zero, running variance one.
    pub fn zeros(config: SdrcnnConfig) -> Result<Self> {
        config.validate()?;
        let mut store = ParamStore::new();
        let k = config.kernel;
        let hidden = config.hidden_channels();
        let bn = config.variant.batch_norm;

        let block = |store: &mut ParamStore, prefix: &str, cin: usize, cout: usize| -> Result<BlockIds> {
            let depthwise = conv(store, &format!("{prefix}.depthwise"), [cin, 1, k, k], cin)?;
            let expand = conv(store, &format!("{prefix}.expand"), [hidden, cin, 1, 1], hidden)?;
            let project = conv(store, &format!("{prefix}.project"), [cout, hidden, 1, 1], cout)?;
            let bn = if bn {
                Some([
                    bn_ids(store, &format!("{prefix}.depthwise.bn"), cin)?,
                    bn_ids(store, &format!("{prefix}.expand.bn"), hidden)?,
                    bn_ids(store, &format!("{prefix}.project.bn"), cout)?,
                ])
            } else {
                None
            };
            Ok(BlockIds {
                depthwise,
                expand,
                project,
                bn,
            })
        };

        let stem = block(&mut store, "stem", config.input_channels(), config.width)?;
        let residual = (1..=config.n_residual_blocks)
            .map(|i| block(&mut store, &format!("residual.{i}"), config.width, config.width))
            .collect::<Result<Vec<_>>>()?;
        let fusion = conv(
            &mut store,
            "fusion",
            [config.bands, config.concat_channels(), 1, 1],
            config.bands,
        )?;
        Ok(Self {
            config,
            store,
            stem,
            residual,
            fusion,
        })
    }

    /// Kaiming-uniform fan-in initialization for block convolutions, zero
    /// biases, unit BN scale, and a zero fusion layer so the untrained network
    /// returns the upsampled MS image.
    pub fn init(config: SdrcnnConfig, seed: u64) -> Result<Self> {
        let mut p = Self::zeros(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let blocks: Vec<BlockIds> = std::iter::once(p.stem).chain(p.residual.iter().copied()).collect();
        for b in blocks {
            // variance-preserving fan-in bounds; the ReLU gain of 2 applies
            // only to the layer that feeds the activation
            for (c, gain) in [(b.depthwise, 1.0), (b.expand, 2.0), (b.project, 1.0)] {
                let t = p.store.get_mut(c.weight);
                let [_, cin, kh, kw] = t.shape();
                let bound = (3.0 * gain / (cin * kh * kw) as f64).sqrt();
                t.data_mut()
                    .iter_mut()
                    .for_each(|v| *v = rng.random_range(-bound..bound));
            }
            if let Some(bns) = b.bn {
                for bn in bns {
                    p.store.get_mut(bn.gamma).data_mut().iter_mut().for_each(|v| *v = 1.0);
                }
            }
        }
        Ok(p)
    }

    pub fn config(&self) -> &SdrcnnConfig {
        &self.config
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    /// Sets every learnable value (weights, biases, BN scale/shift) to zero.
    pub fn zero_learnable(&mut self) {
        self.store.set_all(0.0);
    }

    /// Zeroes the internal weights of residual block `i` (1-based), turning
    /// it into the identity.
    pub fn zero_residual_block(&mut self, i: usize) -> Result<()> {
        let b = *self
            .residual
            .get(i.wrapping_sub(1))
            .ok_or_else(|| Error::invalid(format!("no residual block {i}")))?;
        for c in [b.depthwise, b.expand, b.project] {
            for id in [c.weight, c.bias] {
                self.store.get_mut(id).data_mut().iter_mut().for_each(|v| *v = 0.0);
            }
        }
        Ok(())
    }

    fn record_conv(&self, tape: &mut Tape, ids: ConvIds, x: Var, depthwise: bool) -> Result<Var> {
        let w = tape.param(&self.store, ids.weight);
        let b = tape.param(&self.store, ids.bias);
        if depthwise {
            tape.conv_depthwise(x, w, b)
        } else {
            tape.conv_pointwise(x, w, b)
        }
    }

    fn record_bn(&self, tape: &mut Tape, ids: BnIds, x: Var, mode: Mode, stats: &mut BnStats) -> Result<Var> {
        let gamma = tape.param(&self.store, ids.gamma);
        let beta = tape.param(&self.store, ids.beta);
        match mode {
            Mode::Train => {
                let (y, mean, var) = tape.batch_norm_train(x, gamma, beta, BN_EPS)?;
                stats.0.push((ids.running_mean, ids.running_var, mean, var));
                Ok(y)
            }
            Mode::Eval => tape.batch_norm_eval(
                x,
                gamma,
                beta,
                self.store.get(ids.running_mean).data(),
                self.store.get(ids.running_var).data(),
                BN_EPS,
            ),
        }
    }

    /// Returns `(output, hidden)`.
    fn record_block(
        &self,
        tape: &mut Tape,
        ids: &BlockIds,
        x: Var,
        skip: bool,
        mode: Mode,
        stats: &mut BnStats,
    ) -> Result<(Var, Var)> {
        let variant = self.config.variant;
        let mut d = self.record_conv(tape, ids.depthwise, x, true)?;
        if let Some(bn) = ids.bn {
            d = self.record_bn(tape, bn[0], d, mode, stats)?;
        }
        if variant.extra_relu {
            d = tape.relu(d);
        }
        let mut e = self.record_conv(tape, ids.expand, d, false)?;
        if let Some(bn) = ids.bn {
            e = self.record_bn(tape, bn[1], e, mode, stats)?;
        }
        let hidden = tape.relu(e);
        let mut p = self.record_conv(tape, ids.project, hidden, false)?;
        if let Some(bn) = ids.bn {
            p = self.record_bn(tape, bn[2], p, mode, stats)?;
        }
        let out = if skip { tape.add(x, p)? } else { p };
        Ok((out, hidden))
    }

    /// Records the full dense forward pass on `tape`.
    pub fn record(&self, tape: &mut Tape, pan: Var, lrms: Var, mode: Mode) -> Result<(ForwardVars, BnStats)> {
        let cfg = &self.config;
        check_pair(tape.value(pan), tape.value(lrms), cfg.upsample_factor)?;
        if tape.value(lrms).channels() != cfg.bands {
            return Err(Error::invalid(format!(
                "LRMS has {} bands, model expects {}",
                tape.value(lrms).channels(),
                cfg.bands
            )));
        }
        let mut stats = BnStats::default();
        let upsampled = tape.upsample_bicubic(lrms, cfg.upsample_factor)?;
        let input = tape.concat(&[pan, upsampled])?;
        let (stem_out, _) = self.record_block(tape, &self.stem, input, false, mode, &mut stats)?;

        let mut running = stem_out;
        let mut residual_inputs = Vec::with_capacity(self.residual.len());
        let mut residual_outputs = Vec::with_capacity(self.residual.len());
        let mut additions = Vec::with_capacity(self.residual.len());
        for ids in &self.residual {
            residual_inputs.push(running);
            let (f, _) = self.record_block(tape, ids, running, true, mode, &mut stats)?;
            residual_outputs.push(f);
            running = tape.add(running, f)?;
            additions.push(running);
        }
        let mut concat = tape.concat(&additions)?;
        if cfg.variant.extra_relu {
            concat = tape.relu(concat);
        }
        let residual_image = self.record_conv(tape, self.fusion, concat, false)?;
        let hrms = if cfg.variant.spectral_mapping {
            tape.add(residual_image, upsampled)?
        } else {
            residual_image
        };
        Ok((
            ForwardVars {
                input,
                stem_out,
                residual_inputs,
                residual_outputs,
                additions,
                concat,
                residual_image,
                upsampled,
                hrms,
            },
            stats,
        ))
    }

    /// Inference-mode forward pass returning every intermediate.
    pub fn forward(&self, pan: &Tensor4, lrms: &Tensor4) -> Result<ForwardTrace> {
        let mut tape = Tape::new();
        let p = tape.input(pan.detached(), false);
        let l = tape.input(lrms.detached(), false);
        let (v, _) = self.record(&mut tape, p, l, Mode::Eval)?;
        let get = |x: Var| tape.value(x).clone();
        Ok(ForwardTrace {
            input: get(v.input),
            stem_out: get(v.stem_out),
            residual_inputs: v.residual_inputs.iter().map(|&x| get(x)).collect(),
            residual_outputs: v.residual_outputs.iter().map(|&x| get(x)).collect(),
            additions: v.additions.iter().map(|&x| get(x)).collect(),
            concat: get(v.concat),
            residual_image: get(v.residual_image),
            upsampled: get(v.upsampled),
            hrms: get(v.hrms),
        })
    }

    /// Fused image only, without keeping intermediates.
    pub fn predict_tensor(&self, pan: &Tensor4, lrms: &Tensor4) -> Result<Tensor4> {
        let mut tape = Tape::new();
        let p = tape.input(pan.detached(), false);
        let l = tape.input(lrms.detached(), false);
        let (v, _) = self.record(&mut tape, p, l, Mode::Eval)?;
        Ok(tape.take_value(v.hrms))
    }

    pub fn predict(&self, pan: &Raster, lrms: &Raster) -> Result<Raster> {
        let out = self.predict_tensor(&pan.to_tensor(), &lrms.to_tensor())?;
        Ok(Raster::from_tensor(&out, 0))
    }

    fn block_forward(&self, ids: &BlockIds, x: &Tensor4, skip: bool, expect: usize) -> Result<BlockOutput> {
        if x.channels() != expect {
            return Err(Error::invalid(format!(
                "block expects {expect} channels, got {}",
                x.channels()
            )));
        }
        let mut tape = Tape::new();
        let xv = tape.input(x.detached(), false);
        let (out, hidden) = self.record_block(&mut tape, ids, xv, skip, Mode::Eval, &mut BnStats::default())?;
        Ok(BlockOutput {
            hidden: tape.value(hidden).clone(),
            output: tape.value(out).clone(),
        })
    }

    /// Stem Block on a `(n, B+1, H, W)` input.
    pub fn stem_forward(&self, input: &Tensor4) -> Result<BlockOutput> {
        self.block_forward(&self.stem, input, false, self.config.input_channels())
    }

    /// Residual Block `i` (1-based) on a `(n, width, H, W)` input.
    pub fn residual_forward(&self, i: usize, input: &Tensor4) -> Result<BlockOutput> {
        let ids = self
            .residual
            .get(i.wrapping_sub(1))
            .ok_or_else(|| Error::invalid(format!("no residual block {i}")))?;
        self.block_forward(ids, input, true, self.config.width)
    }

    /// Folds batch statistics into the running estimates.
    pub fn apply_bn_stats(&mut self, stats: &BnStats) {
        for (rm, rv, mean, var) in &stats.0 {
            let m = self.store.get_mut(*rm);
            for (r, s) in m.data_mut().iter_mut().zip(mean) {
                *r = (1.0 - BN_MOMENTUM) * *r + BN_MOMENTUM * s;
            }
            let v = self.store.get_mut(*rv);
            for (r, s) in v.data_mut().iter_mut().zip(var) {
                *r = (1.0 - BN_MOMENTUM) * *r + BN_MOMENTUM * s;
            }
        }
    }

    /// Overwrites BN running statistics and scale/shift with fixed values
    /// for every normalization layer.
    pub fn freeze_bn(&mut self, gamma: f64, beta: f64, mean: f64, var: f64) {
        let blocks: Vec<BlockIds> = std::iter::once(self.stem)
            .chain(self.residual.iter().copied())
            .collect();
        for b in blocks {
            for bn in b.bn.into_iter().flatten() {
                for (id, v) in [
                    (bn.gamma, gamma),
                    (bn.beta, beta),
                    (bn.running_mean, mean),
                    (bn.running_var, var),
                ] {
                    self.store.get_mut(id).data_mut().iter_mut().for_each(|x| *x = v);
                }
            }
        }
    }

    /// Copies every non-BN tensor from `other` (same names and shapes).
    pub fn copy_shared_from(&mut self, other: &SdrcnnParams) -> Result<()> {
        for e in other.store.entries() {
            if let Some(id) = self.store.id_of(&e.name) {
                let dst = self.store.get_mut(id);
                if dst.shape() != e.tensor.shape() {
                    return Err(Error::invalid(format!("shape mismatch for {}", e.name)));
                }
                dst.data_mut().copy_from_slice(e.tensor.data());
            }
        }
        Ok(())
    }

    pub(crate) fn from_store(config: SdrcnnConfig, store: ParamStore) -> Result<Self> {
        let mut p = Self::zeros(config)?;
        p.store.load_values(&store)?;
        Ok(p)
    }
}

fn conv(store: &mut ParamStore, prefix: &str, shape: [usize; 4], out: usize) -> Result<ConvIds> {
    Ok(ConvIds {
        weight: store.insert(format!("{prefix}.weight"), Tensor4::zeros(shape), true)?,
        bias: store.insert(format!("{prefix}.bias"), Tensor4::zeros([1, out, 1, 1]), true)?,
    })
}

fn bn_ids(store: &mut ParamStore, prefix: &str, c: usize) -> Result<BnIds> {
    Ok(BnIds {
        gamma: store.insert(format!("{prefix}.gamma"), Tensor4::zeros([1, c, 1, 1]), true)?,
        beta: store.insert(format!("{prefix}.beta"), Tensor4::zeros([1, c, 1, 1]), true)?,
        running_mean: store.insert(format!("{prefix}.running_mean"), Tensor4::zeros([1, c, 1, 1]), false)?,
        running_var: store.insert(
            format!("{prefix}.running_var"),
            Tensor4::filled([1, c, 1, 1], 1.0),
            false,
        )?,
    })
}
