//! Minimal dense-tensor engine with reverse-mode automatic differentiation
//! and an Adam optimizer. 64-bit floats throughout: the networks are tiny,
//! and determinism plus clean finite-difference checks matter more than
//! speed.

pub mod adam;
pub mod graph;
pub mod serialize;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use graph::{Graph, NodeId};
pub use serialize::{read_named_tensors, write_named_tensors, SerializeError, FORMAT_VERSION};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("shape {shape:?} implies {expected} values, got {found}")]
    LengthMismatch {
        shape: Vec<usize>,
        expected: usize,
        found: usize,
    },
    #[error("parameter `{name}`: expected shape {expected:?}, found {found:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
}

#[derive(Debug, Error)]
pub enum AutogradError {
    #[error("backward requires a scalar loss, got shape {shape:?}")]
    NonScalarLoss { shape: Vec<usize> },
    #[error("gradients already populated; rebuild the graph before calling backward again")]
    RepeatedBackward,
}
