use serde::{Deserialize, Serialize};

use crate::autodiff::Var;
use crate::error::{Error, Result};
use crate::nn::{
    CellKind, Direction, EmbeddingTable, FeatureIds, Graph, Initializer, ParamStore, SequenceRunner, Tower,
};
use crate::sequencing::{build_sequence, slice_windows, AdaptiveBank, SharingPlan};

use super::EmbeddingSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DcrnnConfig {
    pub embedding: EmbeddingSpec,
    pub plan: SharingPlan,
    pub cell: CellKind,
    pub direction: Direction,
    pub hidden_dim: usize,
    pub ada: bool,
    /// Hidden widths of each task tower; a single output unit follows.
    pub tower: Vec<usize>,
}

impl DcrnnConfig {
    pub fn tower_input(&self) -> usize {
        match self.direction {
            Direction::Uni => self.hidden_dim,
            Direction::Bi => 2 * self.hidden_dim,
        }
    }
}

/// Shared embedding, one adaptive feature sequence, a separate RNN and
/// tower per task; task `i` reads window `i` of the sequence.
#[derive(Clone, Debug)]
pub struct Dcrnn {
    config: DcrnnConfig,
    store: ParamStore,
    embedding: EmbeddingTable,
    bank: AdaptiveBank,
    runners: Vec<SequenceRunner>,
    towers: Vec<Tower>,
}

impl Dcrnn {
    pub fn new(config: DcrnnConfig, seed: u64) -> Result<Self> {
        if config.hidden_dim == 0 || config.tower.contains(&0) {
            return Err(Error::Contract("hidden and tower widths must be positive".into()));
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
        let seq_len = config.plan.required_len();
        let bank = if config.ada {
            AdaptiveBank::enabled(&mut store, &mut init, seq_len, width)
        } else {
            AdaptiveBank::disabled(seq_len, width)
        };
        let mut runners = Vec::new();
        let mut towers = Vec::new();
        for t in 0..config.plan.n_tasks() {
            runners.push(SequenceRunner::new(
                &mut store,
                &mut init,
                &format!("task{t}.rnn"),
                config.cell,
                config.direction,
                width,
                config.hidden_dim,
            ));
            towers.push(Tower::new(
                &mut store,
                &mut init,
                &format!("task{t}.tower"),
                config.tower_input(),
                &config.tower,
            ));
        }
        Ok(Dcrnn {
            config,
            store,
            embedding,
            bank,
            runners,
            towers,
        })
    }

    pub fn config(&self) -> &DcrnnConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn embedding(&self) -> &EmbeddingTable {
        &self.embedding
    }

    pub fn bank(&self) -> &AdaptiveBank {
        &self.bank
    }

    pub fn runners(&self) -> &[SequenceRunner] {
        &self.runners
    }

    pub fn towers(&self) -> &[Tower] {
        &self.towers
    }

    pub fn n_tasks(&self) -> usize {
        self.runners.len()
    }

    /// `X0` and the per-task input windows fed to the RNNs.
    pub fn task_inputs(&self, g: &mut Graph, batch: &FeatureIds) -> Result<(Var, Vec<Vec<Var>>)> {
        let x0 = self.embedding.embed(g, batch)?;
        let seq = build_sequence(g, x0, &self.bank)?;
        let windows = slice_windows(&self.config.plan, &seq)?;
        Ok((x0, windows))
    }

    /// One `[batch x 1]` logit node per task.
    pub fn forward(&self, g: &mut Graph, batch: &FeatureIds) -> Result<Vec<Var>> {
        let (_, windows) = self.task_inputs(g, batch)?;
        self.forward_windows(g, &windows)
    }

    /// Task logits from precomputed windows, one per task.
    pub fn forward_windows(&self, g: &mut Graph, windows: &[Vec<Var>]) -> Result<Vec<Var>> {
        if windows.len() != self.runners.len() {
            return Err(Error::Contract(format!(
                "{} windows for {} tasks",
                windows.len(),
                self.runners.len()
            )));
        }
        windows
            .iter()
            .zip(&self.runners)
            .zip(&self.towers)
            .map(|((window, runner), tower)| {
                let rep = runner.run(g, window)?;
                tower.forward(g, rep)
            })
            .collect()
    }
}
