use log::info;

use super::{evaluate, train, EvalMode, EvalSettings, Method, TrainConfig};
use crate::error::Result;
use crate::metrics::MetricReport;
use crate::model::{param_count, Variant};
use crate::wald::SamplePair;

/// Parameter targets of the capacity comparison.
pub const BUDGET_TARGETS: [usize; 3] = [50_000, 100_000, 200_000];

/// Default budget the toggle variants are sized to.
const TOGGLE_BUDGET: usize = 100_000;

#[derive(Debug, Clone)]
pub struct AblationRun {
    pub label: String,
    pub config: TrainConfig,
    pub param_count: usize,
    pub final_loss: f64,
    pub report: MetricReport,
}

/// The eight spectral-mapping / batch-norm / extra-ReLU combinations, each
/// re-budgeted to `base.budget` (100K when unset), then the three budget runs
/// of the reference variant. All share the seed and training settings of `base`.
pub fn ablation_variants(base: &TrainConfig) -> Result<Vec<(String, TrainConfig)>> {
    let target = base.budget.unwrap_or(TOGGLE_BUDGET);
    let mut out = Vec::with_capacity(11);
    for bits in 0..8u8 {
        let variant = Variant {
            spectral_mapping: bits & 1 == 0,
            batch_norm: bits & 2 != 0,
            extra_relu: bits & 4 != 0,
        };
        let mut cfg = base.clone();
        cfg.model.variant = variant;
        cfg.budget = Some(target);
        cfg.resolved_model()?;
        out.push((variant.label(), cfg));
    }
    for &t in &BUDGET_TARGETS {
        let mut cfg = base.clone();
        cfg.model.variant = Variant::default();
        cfg.budget = Some(t);
        cfg.resolved_model()?;
        out.push((format!("budget={}K", t / 1000), cfg));
    }
    Ok(out)
}

/// Trains and scores every variant on the same split.
pub fn run_ablation(
    base: &TrainConfig,
    train_set: &[SamplePair],
    val_set: &[SamplePair],
    test_set: &[SamplePair],
    settings: &EvalSettings,
) -> Result<Vec<AblationRun>> {
    let mut runs = Vec::new();
    for (label, cfg) in ablation_variants(base)? {
        let model = cfg.resolved_model()?;
        info!(
            "ablation {label}: width {} ({} params)",
            model.width,
            param_count(&model)?
        );
        let outcome = train(&cfg, train_set, val_set)?;
        let params = outcome.best.as_ref().map_or(&outcome.params, |b| &b.params);
        let mut report = evaluate(&Method::Sdrcnn(params), test_set, EvalMode::Reduced, settings)?;
        report.method = format!("sdrcnn[{label}]");
        runs.push(AblationRun {
            label,
            param_count: param_count(&model)?,
            final_loss: outcome.log.raw.last().copied().unwrap_or(f64::NAN),
            config: cfg,
            report,
        });
    }
    Ok(runs)
}
