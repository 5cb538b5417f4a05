use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ParamStore, Tape, Tensor4, Var};
use crate::error::{Error, Result};

/// Which coordinates to perturb.
#[derive(Debug, Clone, Copy)]
pub enum Coords {
    All,
    /// At most `per_tensor` randomly chosen coordinates from every input and
    /// every trainable parameter.
    Sample {
        per_tensor: usize,
        seed: u64,
    },
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// max |analytic - numeric| / max(1, |numeric|)
    pub max_rel_error: f64,
    /// Label of the coordinate attaining the maximum.
    pub worst: String,
    pub checked: usize,
}

fn pick(len: usize, coords: Coords, salt: u64) -> Vec<usize> {
    match coords {
        Coords::All => (0..len).collect(),
        Coords::Sample { per_tensor, seed } => {
            if per_tensor >= len {
                return (0..len).collect();
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let mut idx = sample(&mut rng, len, per_tensor).into_vec();
            idx.sort_unstable();
            idx
        }
    }
}

/// Compares tape gradients of the scalar built by `f` against central
/// differences, for every input and every trainable entry of `store`.
///
/// `f` receives a fresh tape, the store, and one `Var` per input.
pub fn grad_check<F>(
    store: &mut ParamStore,
    inputs: &mut [Tensor4],
    eps: f64,
    coords: Coords,
    mut f: F,
) -> Result<GradCheckReport>
where
    F: FnMut(&mut Tape, &ParamStore, &[Var]) -> Result<Var>,
{
    if !(1e-7..=1e-4).contains(&eps) {
        return Err(Error::invalid(format!("grad_check eps {eps:e} outside [1e-7, 1e-4]")));
    }

    let eval = |store: &ParamStore, inputs: &[Tensor4], f: &mut F| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = inputs.iter().map(|t| tape.input(t.clone(), true)).collect();
        let out = f(&mut tape, store, &vars)?;
        tape.value(out)
            .scalar_value()
            .ok_or_else(|| Error::invalid("grad_check closure must return a scalar"))
    };

    // analytic
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.input(t.clone(), true)).collect();
    let out = f(&mut tape, store, &vars)?;
    let grads = tape.backward(out)?;
    let input_grads: Vec<Tensor4> = vars
        .iter()
        .zip(inputs.iter())
        .map(|(&v, t)| grads.wrt(v).cloned().unwrap_or_else(|| Tensor4::zeros(t.shape())))
        .collect();
    let mut scratch = store.clone();
    scratch.zero_grads();
    scratch.accumulate(&tape, &grads);

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: String::new(),
        checked: 0,
    };
    let mut record = |label: String, analytic: f64, numeric: f64| {
        let err = (analytic - numeric).abs() / numeric.abs().max(1.0);
        if err > report.max_rel_error || report.checked == 0 {
            report.max_rel_error = report.max_rel_error.max(err);
            report.worst = label;
        }
        report.checked += 1;
    };

    for k in 0..inputs.len() {
        for i in pick(inputs[k].len(), coords, k as u64) {
            let orig = inputs[k].data()[i];
            inputs[k].data_mut()[i] = orig + eps;
            let plus = eval(store, inputs, &mut f)?;
            inputs[k].data_mut()[i] = orig - eps;
            let minus = eval(store, inputs, &mut f)?;
            inputs[k].data_mut()[i] = orig;
            record(
                format!("input[{k}][{i}]"),
                input_grads[k].data()[i],
                (plus - minus) / (2.0 * eps),
            );
        }
    }

    let ids: Vec<_> = store.trainable_ids().collect();
    for id in ids {
        let analytic: Vec<f64> = scratch
            .get(id)
            .grad()
            .map(|g| g.to_vec())
            .unwrap_or_else(|| vec![0.0; store.get(id).len()]);
        for i in pick(store.get(id).len(), coords, 1000 + id.index() as u64) {
            let orig = store.get(id).data()[i];
            store.get_mut(id).data_mut()[i] = orig + eps;
            let plus = eval(store, inputs, &mut f)?;
            store.get_mut(id).data_mut()[i] = orig - eps;
            let minus = eval(store, inputs, &mut f)?;
            store.get_mut(id).data_mut()[i] = orig;
            let label = format!("{}[{i}]", store.entry(id).name);
            record(label, analytic[i], (plus - minus) / (2.0 * eps));
        }
    }
    Ok(report)
}
