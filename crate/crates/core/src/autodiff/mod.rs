//! Minimal reverse-mode automatic differentiation over dense tensors.
//!
//! A [`Graph`] records each operation as it is evaluated. Calling
//! [`Graph::backward`] on a scalar walks the record in reverse and leaves
//! gradients on every trainable leaf created with [`Graph::param`].

pub mod conv;
pub mod gradcheck;
mod graph;
mod gru;
mod linalg;
pub mod norm;
mod pool;
mod tensor;

pub use conv::Padding;
pub use graph::{Graph, Mode, Var, LOG_CLAMP};
pub use norm::{BatchNormState, BatchStats};
pub use tensor::{Scalar, Tensor};
