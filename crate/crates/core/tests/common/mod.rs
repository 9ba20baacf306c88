#![allow(dead_code)]

use dcrnn::data::SynthSpec;
use dcrnn::models::{DcrnnConfig, EmbeddingSpec, MmoeConfig};
use dcrnn::nn::{CellKind, Direction};
use dcrnn::sequencing::SharingPlan;

pub fn tiny_embedding() -> EmbeddingSpec {
    EmbeddingSpec {
        vocab_sizes: vec![5, 4, 6],
        dim: 3,
    }
}

pub fn tiny_dcrnn(cell: CellKind, direction: Direction, ada: bool) -> DcrnnConfig {
    DcrnnConfig {
        embedding: tiny_embedding(),
        plan: SharingPlan::alicpp(),
        cell,
        direction,
        hidden_dim: 4,
        ada,
        tower: vec![5],
    }
}

pub fn tiny_mmoe() -> MmoeConfig {
    MmoeConfig {
        embedding: tiny_embedding(),
        n_tasks: 2,
        experts: 3,
        expert_hidden: vec![6, 4],
        tower: vec![3],
    }
}

/// The generator settings used by the learning tests: eight fields, each
/// observing one latent coordinate through 15 equiprobable buckets.
pub fn synth(seed: u64, n: usize, rho: f64) -> SynthSpec {
    SynthSpec {
        seed,
        n_examples: n,
        first_index: 0,
        vocab_sizes: vec![16; 8],
        latent_dim: 8,
        click_noise: 0.5,
        rho,
        signal: 2.0,
        click_bias: 0.0,
        conv_bias: 0.0,
    }
}

/// Desk-scale DCRNN: BiLSTM, embedding 32, the two-task alicpp plan.
pub fn desk_dcrnn(vocab_sizes: Vec<usize>) -> DcrnnConfig {
    DcrnnConfig {
        embedding: EmbeddingSpec { vocab_sizes, dim: 32 },
        plan: SharingPlan::alicpp(),
        cell: CellKind::Lstm,
        direction: Direction::Bi,
        hidden_dim: 32,
        ada: true,
        tower: vec![64, 32],
    }
}

/// Desk-scale MMoE: eight experts of widths 128-64, same embedding and towers.
pub fn desk_mmoe(vocab_sizes: Vec<usize>) -> MmoeConfig {
    MmoeConfig {
        embedding: EmbeddingSpec { vocab_sizes, dim: 32 },
        n_tasks: 2,
        experts: 8,
        expert_hidden: vec![128, 64],
        tower: vec![64, 32],
    }
}

/// Pairwise AUC: P(score+ > score-) + P(tie) / 2, by enumeration.
pub fn brute_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut num = 0.0;
    let mut pairs = 0.0;
    for (i, &li) in labels.iter().enumerate() {
        if !li {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                num += 1.0;
            } else if scores[i] == scores[j] {
                num += 0.5;
            }
        }
    }
    num / pairs
}
