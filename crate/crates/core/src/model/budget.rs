use super::{SdrcnnConfig, SdrcnnParams};
use crate::error::{Error, Result};

fn block_params(cfg: &SdrcnnConfig, cin: usize, cout: usize) -> usize {
    let k2 = cfg.kernel * cfg.kernel;
    let hidden = cfg.hidden_channels();
    let depthwise = cin * k2 + cin;
    let expand = cin * hidden + hidden;
    let project = hidden * cout + cout;
    let bn = if cfg.variant.batch_norm {
        2 * (cin + hidden + cout)
    } else {
        0
    };
    depthwise + expand + project + bn
}

/// Closed-form count of trainable scalars (weights and biases of the stem,
/// every residual block and the fusion layer, plus BN scale/shift when
/// enabled).
pub fn param_count(cfg: &SdrcnnConfig) -> Result<usize> {
    cfg.validate()?;
    let stem = block_params(cfg, cfg.input_channels(), cfg.width);
    let residual = cfg.n_residual_blocks * block_params(cfg, cfg.width, cfg.width);
    let fusion = cfg.concat_channels() * cfg.bands + cfg.bands;
    Ok(stem + residual + fusion)
}

/// Counts by building a zero parameter set and summing tensor sizes.
pub fn enumerate_param_count(cfg: &SdrcnnConfig) -> Result<usize> {
    Ok(SdrcnnParams::zeros(*cfg)?.store().trainable_count())
}

/// Largest width whose parameter count stays within `target`, for the default
/// variant.
pub fn budget_width(target: usize, bands: usize, expansion: usize) -> Result<usize> {
    let template = SdrcnnConfig {
        bands,
        expansion,
        ..SdrcnnConfig::default()
    };
    budget_width_for(target, &template)
}

/// Like [`budget_width`] but keeps every other field of `template`,
/// including its ablation switches.
pub fn budget_width_for(target: usize, template: &SdrcnnConfig) -> Result<usize> {
    let count = |width: usize| param_count(&SdrcnnConfig { width, ..*template });
    if count(1)? > target {
        return Err(Error::invalid(format!(
            "parameter budget {target} is below the width-1 network ({})",
            count(1)?
        )));
    }
    // count is strictly increasing in width; grow then bisect
    let mut hi = 2;
    while count(hi)? <= target {
        hi *= 2;
    }
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if count(mid)? <= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}
