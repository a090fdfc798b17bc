//! Dense arrays, a reverse-mode autodiff graph, Adam, and the tensor
//! checkpoint format.

mod adam;
mod array;
pub mod checkpoint;
pub mod gradcheck;
mod graph;

pub use adam::{AdamConfig, AdamState};
pub use array::{Array, Precision, Real};
pub use gradcheck::{check_gradients, relative_error, GradCheck};
pub use graph::{Gradients, Graph, Var};

pub use graph::{elu, sigmoid, softmax_in_place};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TensorError {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("contract error: {0}")]
    Contract(String),
    #[error("numeric error: {0}")]
    Numeric(String),
}
