use serde::{Deserialize, Serialize};

use crate::autodiff::{ActivationKind, Var};
use crate::error::{Error, Result};
use crate::nn::{Dense, EmbeddingTable, FeatureIds, Graph, Initializer, ParamStore, Tower};

use super::EmbeddingSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MmoeConfig {
    pub embedding: EmbeddingSpec,
    pub n_tasks: usize,
    pub experts: usize,
    /// Hidden widths of every expert MLP (ReLU); the last is the expert output width.
    pub expert_hidden: Vec<usize>,
    /// Hidden widths of each task tower; a single output unit follows.
    pub tower: Vec<usize>,
}

/// Multi-gate mixture of experts: shared experts over `X0`, one softmax
/// gate per task mixing expert outputs, then a per-task tower.
#[derive(Clone, Debug)]
pub struct Mmoe {
    config: MmoeConfig,
    store: ParamStore,
    embedding: EmbeddingTable,
    experts: Vec<Tower>,
    gates: Vec<Dense>,
    towers: Vec<Tower>,
}

impl Mmoe {
    pub fn new(config: MmoeConfig, seed: u64) -> Result<Self> {
        if config.n_tasks == 0 || config.experts == 0 || config.expert_hidden.is_empty() {
            return Err(Error::Contract(
                "MMoE needs at least one task, one expert and one expert layer".into(),
            ));
        }
        if config.expert_hidden.contains(&0) || config.tower.contains(&0) {
            return Err(Error::Contract("expert and tower widths must be positive".into()));
        }
        let mut store = ParamStore::new();
        let mut init = Initializer::new(seed);
        let embedding = EmbeddingTable::new(
            &mut store,
            &mut init,
            &config.embedding.vocab_sizes,
            config.embedding.dim,
        )?;
        let width = embedding.output_width();
        let experts = (0..config.experts)
            .map(|e| {
                Tower::mlp(
                    &mut store,
                    &mut init,
                    "experts",
                    &format!("expert{e}"),
                    width,
                    &config.expert_hidden,
                    ActivationKind::Relu,
                )
            })
            .collect();
        let gates = (0..config.n_tasks)
            .map(|t| {
                Dense::new(
                    &mut store,
                    &mut init,
                    "gates",
                    &format!("task{t}"),
                    width,
                    config.experts,
                    ActivationKind::Identity,
                )
            })
            .collect();
        let expert_out = *config.expert_hidden.last().unwrap();
        let towers = (0..config.n_tasks)
            .map(|t| {
                Tower::new(
                    &mut store,
                    &mut init,
                    &format!("task{t}.tower"),
                    expert_out,
                    &config.tower,
                )
            })
            .collect();
        Ok(Mmoe {
            config,
            store,
            embedding,
            experts,
            gates,
            towers,
        })
    }

    pub fn config(&self) -> &MmoeConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn experts(&self) -> &[Tower] {
        &self.experts
    }

    pub fn gates(&self) -> &[Dense] {
        &self.gates
    }

    pub fn n_tasks(&self) -> usize {
        self.config.n_tasks
    }

    /// Softmax gate weights `[batch x experts]` for every task.
    pub fn gate_weights(&self, g: &mut Graph, x0: Var) -> Result<Vec<Var>> {
        self.gates
            .iter()
            .map(|gate| {
                let logits = gate.forward(g, x0)?;
                g.tape.softmax_rows(logits)
            })
            .collect()
    }

    pub fn forward(&self, g: &mut Graph, batch: &FeatureIds) -> Result<Vec<Var>> {
        let x0 = self.embedding.embed(g, batch)?;
        let outs = self
            .experts
            .iter()
            .map(|e| e.forward(g, x0))
            .collect::<Result<Vec<_>>>()?;
        let weights = self.gate_weights(g, x0)?;
        let mut logits = Vec::with_capacity(self.towers.len());
        for (w, tower) in weights.into_iter().zip(&self.towers) {
            let mut mixed: Option<Var> = None;
            for (e, &out) in outs.iter().enumerate() {
                let we = g.tape.slice(w, 1, e, e + 1)?;
                let term = g.tape.mul_col(out, we)?;
                mixed = Some(match mixed {
                    None => term,
                    Some(acc) => g.tape.add(acc, term)?,
                });
            }
            logits.push(tower.forward(g, mixed.expect("at least one expert"))?);
        }
        Ok(logits)
    }
}
