use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};

/// Positive-class weight per task (click, conversion) measured on the
/// public Ali-CCP release: roughly 24 impressions per click and 4584 per
/// conversion.
pub const ALICPP_POS_WEIGHT: [f64; 2] = [24.0, 4584.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    /// Weight of the positive term, per task.
    pub pos_weight: Vec<f64>,
    /// Weight of each task in the joint loss.
    pub task_weights: Vec<f64>,
}

impl LossConfig {
    /// Unit weights everywhere.
    pub fn uniform(n_tasks: usize) -> Self {
        LossConfig {
            pos_weight: vec![1.0; n_tasks],
            task_weights: vec![1.0; n_tasks],
        }
    }

    pub fn alicpp() -> Self {
        LossConfig {
            pos_weight: ALICPP_POS_WEIGHT.to_vec(),
            task_weights: vec![1.0; 2],
        }
    }

    pub fn validate(&self, n_tasks: usize) -> Result<()> {
        for (name, v) in [("pos_weight", &self.pos_weight), ("task_weights", &self.task_weights)] {
            if v.len() != n_tasks {
                return Err(Error::Contract(format!(
                    "loss {name} has {} entries for {n_tasks} tasks",
                    v.len()
                )));
            }
            if let Some(w) = v.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
                return Err(Error::Contract(format!(
                    "loss {name} entry {w} must be finite and non-negative"
                )));
            }
        }
        Ok(())
    }
}

/// Batch mean of `-[w z ln σ(x) + (1 - z) ln(1 - σ(x))]`.
pub fn weighted_bce(tape: &mut Tape, logits: Var, labels: &[f64], pos_weight: f64) -> Result<Var> {
    tape.weighted_bce(logits, labels, pos_weight)
}

/// `Σ_t weights[t] * losses[t]`.
pub fn multitask_loss(tape: &mut Tape, losses: &[Var], weights: &[f64]) -> Result<Var> {
    if losses.len() != weights.len() || losses.is_empty() {
        return Err(Error::Contract(format!(
            "multitask_loss: {} losses, {} weights",
            losses.len(),
            weights.len()
        )));
    }
    let mut total = tape.scale(losses[0], weights[0]);
    for (&l, &w) in losses.iter().zip(weights).skip(1) {
        let term = tape.scale(l, w);
        total = tape.add(total, term)?;
    }
    Ok(total)
}
