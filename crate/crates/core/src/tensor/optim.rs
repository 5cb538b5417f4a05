use super::ParamStore;
use crate::error::{Error, Result};

/// Adaptive-moment hyperparameters. The defaults are the usual ones; nothing
/// about the network dictates them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam step over a flat slice. `step` is 1-based.
pub fn adam_update(
    cfg: &AdamConfig,
    step: u64,
    params: &mut [f64],
    grads: &[f64],
    first: &mut [f64],
    second: &mut [f64],
) {
    let bc1 = 1.0 - cfg.beta1.powi(step as i32);
    let bc2 = 1.0 - cfg.beta2.powi(step as i32);
    for i in 0..params.len() {
        let g = grads[i];
        first[i] = cfg.beta1 * first[i] + (1.0 - cfg.beta1) * g;
        second[i] = cfg.beta2 * second[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = first[i] / bc1;
        let v_hat = second[i] / bc2;
        params[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
}

/// Moment buffers for every trainable entry of a [`ParamStore`].
#[derive(Debug, Clone)]
pub struct OptimizerState {
    config: AdamConfig,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(config: AdamConfig, store: &ParamStore) -> Self {
        let first: Vec<Vec<f64>> = store
            .entries()
            .iter()
            .map(|e| {
                if e.trainable {
                    vec![0.0; e.tensor.len()]
                } else {
                    Vec::new()
                }
            })
            .collect();
        Self {
            config,
            step: 0,
            second: first.clone(),
            first,
        }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies the gradients currently held in `store`.
    pub fn step(&mut self, store: &mut ParamStore) -> Result<()> {
        if store.len() != self.first.len() {
            return Err(Error::invalid("optimizer state does not match parameter store"));
        }
        self.step += 1;
        let ids: Vec<_> = store.trainable_ids().collect();
        for id in ids {
            let t = store.get_mut(id);
            let grads = match t.grad() {
                Some(g) => g.to_vec(),
                None => continue,
            };
            adam_update(
                &self.config,
                self.step,
                t.data_mut(),
                &grads,
                &mut self.first[id.index()],
                &mut self.second[id.index()],
            );
        }
        Ok(())
    }
}
