//! A compact reverse-mode automatic differentiation engine.
//!
//! Tensors are dense and row-major. Most layers operate on a
//! `[rows, features]` view of their input, with sequence models passing the
//! sequence length explicitly so that rows `b * seq_len .. (b + 1) * seq_len`
//! belong to sequence `b`. Heavy operations (attention, LSTM, convolution)
//! are fused nodes with hand-written backward passes; each is covered by a
//! finite-difference check in `tests/gradients.rs`.

mod gemm;
pub mod gradcheck;
mod graph;
mod ops;
mod params;
mod scalar;
mod tensor;

pub use gemm::{gemm, matmul, MatMut, MatRef};
pub use graph::{Gradients, Graph, Mode, Var};
pub use ops::attention::relative_position_encoding;
pub use ops::conv::Conv2dGeometry;
pub use ops::norm::NORM_EPS;
pub use params::{Init, ParamId, ParamStore};
pub use scalar::Scalar;
pub use tensor::Tensor;

#[derive(Debug, thiserror::Error)]
pub enum NnError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("parameter `{0}` registered twice")]
    DuplicateParam(String),
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
}

pub type Result<T> = std::result::Result<T, NnError>;
