//! Weighted logistic losses, optimizers and the seeded epoch loop.

mod loss;
mod optim;

use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use loss::{multitask_loss, weighted_bce, LossConfig, ALICPP_POS_WEIGHT};
pub use optim::{AdamMoments, Optimizer, OptimizerKind};

use crate::autodiff::Tensor;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::evaluation::{auc, score_tasks};
use crate::models::ModelGraph;
use crate::nn::{Graph, ParamStore};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    pub adam: AdamMoments,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 3,
            batch_size: 1024,
            learning_rate: 1e-4,
            seed: 0,
            optimizer: OptimizerKind::Adam,
            adam: AdamMoments::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Contract("batch_size must be at least 1".into()));
        }
        // Zero is allowed: it makes a run that must leave parameters untouched.
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Contract(format!(
                "learning_rate {} must be finite and non-negative",
                self.learning_rate
            )));
        }
        let m = self.adam;
        if !((0.0..1.0).contains(&m.beta1) && (0.0..1.0).contains(&m.beta2) && m.eps > 0.0) {
            return Err(Error::Contract("Adam needs 0 ≤ β < 1 and ε > 0".into()));
        }
        Ok(())
    }
}

/// One line of the metrics log.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochMetrics {
    /// Starts at 1.
    pub epoch: usize,
    /// Example-weighted mean of the joint loss over the epoch's batches.
    pub train_loss: f64,
    /// Evaluation AUC per task; NaN when the evaluation set is single-class.
    pub aucs: Vec<f64>,
    pub wall_seconds: f64,
}

impl EpochMetrics {
    fn line(&self, timing: bool) -> String {
        let mut out = format!("{}\t{}", self.epoch, self.train_loss);
        for a in &self.aucs {
            let _ = write!(out, "\t{a}");
        }
        if timing {
            let _ = write!(out, "\t{:.3}", self.wall_seconds);
        }
        out
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub epochs: Vec<EpochMetrics>,
}

impl TrainLog {
    /// Tab-separated `epoch, train_loss, auc per task, wall_seconds`, one
    /// line per epoch, no header. Floats print with shortest round-trip
    /// formatting.
    pub fn to_tsv(&self) -> String {
        self.render(true)
    }

    /// The log without its wall-clock column: the part that is a pure
    /// function of seed, config and data.
    pub fn to_tsv_untimed(&self) -> String {
        self.render(false)
    }

    fn render(&self, timing: bool) -> String {
        self.epochs.iter().map(|e| e.line(timing) + "\n").collect()
    }

    pub fn last(&self) -> Option<&EpochMetrics> {
        self.epochs.last()
    }
}

/// Trains `model` in place and evaluates on `eval` after every epoch.
pub fn train(
    model: &mut ModelGraph,
    data: &Dataset,
    eval: &Dataset,
    cfg: &TrainConfig,
    loss_cfg: &LossConfig,
) -> Result<TrainLog> {
    train_with(model, data, eval, cfg, loss_cfg, |_| {})
}

/// [`train`] with a callback after each epoch.
pub fn train_with(
    model: &mut ModelGraph,
    data: &Dataset,
    eval: &Dataset,
    cfg: &TrainConfig,
    loss_cfg: &LossConfig,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<TrainLog> {
    if data.is_empty() {
        return Err(Error::Data("training set is empty".into()));
    }
    cfg.validate()?;
    let n_tasks = model.n_tasks();
    loss_cfg.validate(n_tasks)?;
    if n_tasks > data.task_count() {
        return Err(Error::Contract(format!(
            "model has {n_tasks} tasks, data carries {} labels",
            data.task_count()
        )));
    }

    let mut opt = Optimizer::new(cfg.optimizer, cfg.learning_rate, cfg.adam);
    let mut log = TrainLog::default();
    // Stream 1 of the root seed, so shuffling never shares draws with
    // parameter initialization. Each epoch reshuffles the previous order.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 1..=cfg.epochs {
        let start = Instant::now();
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let (loss, grads) = batch_step(model, data, chunk, loss_cfg)?;
            if !loss.is_finite() || grads.iter().flatten().any(|g| !g.is_finite()) {
                return Err(non_finite_report(model.params(), &grads, loss, epoch, b));
            }
            loss_sum += loss * chunk.len() as f64;
            opt.step(model.params_mut(), &grads);
        }
        let aucs = epoch_aucs(model, eval, cfg.batch_size)?;
        let metrics = EpochMetrics {
            epoch,
            train_loss: loss_sum / data.len() as f64,
            aucs,
            wall_seconds: start.elapsed().as_secs_f64(),
        };
        on_epoch(&metrics);
        log.epochs.push(metrics);
    }
    Ok(log)
}

/// Joint loss and per-parameter gradients of one batch.
pub fn batch_step(
    model: &ModelGraph,
    data: &Dataset,
    indices: &[usize],
    loss_cfg: &LossConfig,
) -> Result<(f64, Vec<Option<Tensor>>)> {
    let batch = data.feature_batch(indices);
    let mut g = Graph::new(model.params());
    let logits = model.forward(&mut g, &batch)?;
    let mut losses = Vec::with_capacity(logits.len());
    for (t, &l) in logits.iter().enumerate() {
        let labels = data.labels(t, indices);
        losses.push(weighted_bce(&mut g.tape, l, &labels, loss_cfg.pos_weight[t])?);
    }
    let total = multitask_loss(&mut g.tape, &losses, &loss_cfg.task_weights)?;
    let loss = g.value(total).item().unwrap_or(f64::NAN);
    let mut grads = g.tape.backward(total)?;
    Ok((loss, g.param_grads(&mut grads)))
}

fn epoch_aucs(model: &ModelGraph, eval: &Dataset, batch_size: usize) -> Result<Vec<f64>> {
    if eval.is_empty() {
        return Ok(vec![f64::NAN; model.n_tasks()]);
    }
    Ok(score_tasks(model, eval, batch_size)?
        .iter()
        .map(|s| auc(s).unwrap_or(f64::NAN))
        .collect())
}

fn non_finite_report(store: &ParamStore, grads: &[Option<Tensor>], loss: f64, epoch: usize, batch: usize) -> Error {
    let mut largest: Option<(String, f64)> = None;
    let mut bad_grads = Vec::new();
    let mut bad_params = Vec::new();
    for group in store.groups() {
        let mut sq = 0.0;
        let mut finite = true;
        for id in store.ids_in_group(&group) {
            if !store.get(id).is_finite() && !bad_params.contains(&group) {
                bad_params.push(group.clone());
            }
            if let Some(g) = grads.get(id.index()).and_then(|g| g.as_ref()) {
                for &v in g.data() {
                    if v.is_finite() {
                        sq += v * v;
                    } else {
                        finite = false;
                    }
                }
            }
        }
        if !finite {
            bad_grads.push(group.clone());
        }
        let norm = sq.sqrt();
        if largest.as_ref().is_none_or(|(_, n)| norm > *n) {
            largest = Some((group, norm));
        }
    }
    let (group, norm) = largest.unwrap_or_else(|| ("<none>".into(), 0.0));
    let mut msg = format!(
        "non-finite training state at epoch {epoch}, batch {batch} (loss {loss}); \
         largest finite gradient norm in group \"{group}\" ({norm:e})"
    );
    if !bad_grads.is_empty() {
        let _ = write!(msg, "; non-finite gradients in {}", bad_grads.join(", "));
    }
    if !bad_params.is_empty() {
        let _ = write!(msg, "; non-finite parameters in {}", bad_params.join(", "));
    }
    Error::Numerical(msg)
}
