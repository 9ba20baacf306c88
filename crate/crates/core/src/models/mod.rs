//! Trainable multi-task graphs: DCRNN and the MMoE baseline.

mod dcrnn;
mod mmoe;

use serde::{Deserialize, Serialize};

pub use dcrnn::{Dcrnn, DcrnnConfig};
pub use mmoe::{Mmoe, MmoeConfig};

use crate::autodiff::{Tensor, Var};
use crate::error::Result;
use crate::nn::{FeatureIds, Graph, ParamStore};
use crate::sequencing::{SharingKind, SharingPlan};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingSpec {
    pub vocab_sizes: Vec<usize>,
    pub dim: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelSpec {
    Dcrnn(DcrnnConfig),
    Mmoe(MmoeConfig),
}

impl ModelSpec {
    pub fn build(&self, seed: u64) -> Result<ModelGraph> {
        Ok(match self {
            ModelSpec::Dcrnn(c) => ModelGraph::Dcrnn(Dcrnn::new(c.clone(), seed)?),
            ModelSpec::Mmoe(c) => ModelGraph::Mmoe(Mmoe::new(c.clone(), seed)?),
        })
    }
}

/// An assembled model with named parameter groups.
#[derive(Clone, Debug)]
pub enum ModelGraph {
    Dcrnn(Dcrnn),
    Mmoe(Mmoe),
}

impl ModelGraph {
    pub fn name(&self) -> &'static str {
        match self {
            ModelGraph::Dcrnn(_) => "dcrnn",
            ModelGraph::Mmoe(_) => "mmoe",
        }
    }

    pub fn params(&self) -> &ParamStore {
        match self {
            ModelGraph::Dcrnn(m) => m.params(),
            ModelGraph::Mmoe(m) => m.params(),
        }
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        match self {
            ModelGraph::Dcrnn(m) => m.params_mut(),
            ModelGraph::Mmoe(m) => m.params_mut(),
        }
    }

    pub fn n_tasks(&self) -> usize {
        match self {
            ModelGraph::Dcrnn(m) => m.n_tasks(),
            ModelGraph::Mmoe(m) => m.n_tasks(),
        }
    }

    /// Per-task `[batch x 1]` logits recorded on `g`.
    pub fn forward(&self, g: &mut Graph, batch: &FeatureIds) -> Result<Vec<Var>> {
        match self {
            ModelGraph::Dcrnn(m) => m.forward(g, batch),
            ModelGraph::Mmoe(m) => m.forward(g, batch),
        }
    }

    /// Raw logits as a `[batch x n_tasks]` tensor.
    pub fn predict(&self, batch: &FeatureIds) -> Result<Tensor> {
        let mut g = Graph::new(self.params());
        let logits = self.forward(&mut g, batch)?;
        let n = logits.len();
        let mut data = vec![0.0; batch.rows * n];
        for (t, &l) in logits.iter().enumerate() {
            for (r, v) in g.value(l).data().iter().enumerate() {
                data[r * n + t] = *v;
            }
        }
        Tensor::matrix(batch.rows, n, data)
    }
}

/// How a plan relates to the classic sharing schemes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SharingReport {
    pub kind: SharingKind,
    pub overlap: usize,
    pub required_len: usize,
    /// Measured overlap of consecutive windows equals `L - I`.
    pub overlap_verified: bool,
}

pub fn degenerate_check(config: &DcrnnConfig) -> SharingReport {
    let plan: &SharingPlan = &config.plan;
    let overlap_verified = (1..plan.n_tasks()).all(|t| {
        let prev = plan.window(t - 1);
        let cur = plan.window(t);
        let shared = cur.clone().filter(|i| prev.contains(i)).count();
        shared == plan.overlap()
    });
    SharingReport {
        kind: plan.sharing(),
        overlap: plan.overlap(),
        required_len: plan.required_len(),
        overlap_verified,
    }
}
