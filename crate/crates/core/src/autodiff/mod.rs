//! Dense `f64` tensors and tape-based reverse-mode differentiation.
//!
//! A [`Tape`] is filled during the forward pass; every op returns a [`Var`]
//! handle. [`Tape::backward`] walks the tape once in reverse and returns the
//! gradient of a scalar root for every node that influences it.

pub mod gradcheck;
mod tape;
mod tensor;

pub use tape::{sigmoid, softplus, ActivationKind, Gradients, Tape, Var};
pub use tensor::{Shape, Tensor};
