//! Multi-task CTR/CVR modelling with RNN-based feature crossing.
//!
//! The crate is layered bottom-up:
//!
//! - [`autodiff`]: dense `f64` tensors and a reverse-mode tape.
//! - [`nn`]: parameter store, embeddings, dense towers, LSTM/GRU cells,
//!   checkpoints.
//! - [`cross`]: DCN and CIN cross layers and a parameter-growth table.
//! - [`sequencing`]: adaptive feature sequences and overlapping task windows.
//! - [`models`]: the DCRNN graph and the MMoE baseline.
//! - [`training`], [`evaluation`]: losses, optimizers, the epoch loop, AUC
//!   and parameter counts.
//! - [`data`]: TSV datasets, the synthetic generator and run configuration.

pub mod autodiff;
pub mod cross;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod models;
pub mod nn;
pub mod sequencing;
pub mod training;

pub use error::{Error, Result};
