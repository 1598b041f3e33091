//! Dense network shared by the congruity net and the federated nets.
//!
//! Layer `h` holds connection vectors `C_j` as the rows of its weight matrix
//! and biases `b_j`. The forward pass computes `y_j = f(C_j X_j + b_j)`; the
//! negative-direction pass runs the same connections transposed,
//! `x_j = g(C_j Y_j + b_j)`, to reconstruct the input. The error is
//! `E(Θ) = Σ ||y − ŷ||² + Σ λ ||x − x̂||²`.

mod activation;
mod codec;
mod objective;
mod params;
mod pass;
mod support;

use thiserror::Error;

pub use activation::{Activation, ActivationSpec};
pub use codec::{decode_params, encode_params, MAGIC, VERSION};
pub(crate) use objective::accumulate;
pub use objective::{error, gradient, mean_error, ErrorConfig, Objective, Sample};
pub use params::{grow_depth, InitConfig, LayerParams, NetworkParams, Role};
pub use pass::{backward_reconstruct, forward, predict, ForwardTrace};
pub use support::{project_support, project_support_in_place, support};

#[derive(Debug, Error, PartialEq)]
pub enum NnError {
    #[error("DimensionMismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch { expected: usize, got: usize, context: &'static str },
    #[error("NonFiniteInput at index {0}")]
    NonFiniteInput(usize),
    #[error("EmptyBatch")]
    EmptyBatch,
    #[error("NonpositiveK")]
    NonpositiveK,
    #[error("network needs at least one layer")]
    NoLayers,
    #[error("invalid error config: {0}")]
    InvalidConfig(String),
    #[error("layer {layer} is not finite")]
    NonFiniteParams { layer: usize },
    #[error("parameter decode: {0}")]
    Decode(String),
}
