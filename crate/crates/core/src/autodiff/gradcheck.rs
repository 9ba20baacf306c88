//! Central finite-difference checks against tape gradients.

use super::{Tape, Tensor, Var};
use crate::error::{Error, Result};

pub const DEFAULT_STEP: f64 = 1e-5;

/// Per-input comparison of analytic and numeric gradients.
#[derive(Clone, Debug)]
pub struct GradReport {
    /// `||analytic - numeric|| / max(||analytic||, ||numeric||)` per input;
    /// zero when both gradients vanish.
    pub relative_errors: Vec<f64>,
}

impl GradReport {
    pub fn max_relative_error(&self) -> f64 {
        self.relative_errors.iter().copied().fold(0.0, f64::max)
    }
}

pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff = analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n) * (a - n))
        .sum::<f64>()
        .sqrt();
    let na = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nn = numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
    let scale = na.max(nn);
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Compares the tape gradient of the scalar built by `f` with central
/// differences of step `step`, perturbing every element of every input.
///
/// `f` receives a fresh tape with `inputs` recorded as leaves, in order.
pub fn check<F>(inputs: &[Tensor], step: f64, f: F) -> Result<GradReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let eval = |values: &[Tensor]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values.iter().map(|t| tape.leaf(t.clone())).collect();
        let root = f(&mut tape, &vars)?;
        tape.value(root)
            .item()
            .ok_or_else(|| Error::Contract("gradient check root must be scalar".into()))
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let root = f(&mut tape, &vars)?;
    let grads = tape.backward(root)?;

    let mut perturbed = inputs.to_vec();
    let mut relative_errors = Vec::with_capacity(inputs.len());
    for (k, var) in vars.iter().enumerate() {
        let analytic = grads
            .get(*var)
            .map(|g| g.data().to_vec())
            .unwrap_or_else(|| vec![0.0; inputs[k].numel()]);
        let mut numeric = Vec::with_capacity(analytic.len());
        for i in 0..inputs[k].numel() {
            let orig = inputs[k].data()[i];
            perturbed[k].data_mut()[i] = orig + step;
            let plus = eval(&perturbed)?;
            perturbed[k].data_mut()[i] = orig - step;
            let minus = eval(&perturbed)?;
            perturbed[k].data_mut()[i] = orig;
            numeric.push((plus - minus) / (2.0 * step));
        }
        relative_errors.push(relative_error(&analytic, &numeric));
    }
    Ok(GradReport { relative_errors })
}
