//! Parameterized layers. Each layer is a bundle of [`ParamId`]s plus a
//! forward function recording onto a [`Graph`].

pub mod checkpoint;
mod dense;
mod embedding;
pub mod gradcheck;
mod params;
mod rnn;

pub use dense::{Dense, Tower};
pub use embedding::{EmbeddingTable, FeatureIds};
pub use params::{Graph, Initializer, Param, ParamId, ParamStore};
pub use rnn::{CellKind, Direction, RnnCell, RnnState, SequenceRunner};
