//! Dense tensors, differentiable operators and their verification.

pub mod checkpoint;
pub mod gradcheck;
pub mod lstm;
pub mod ops;
mod param;
mod scalar;
pub mod tape;
mod tensor;

use thiserror::Error;

pub use checkpoint::Checkpoint;
pub use gradcheck::{grad_check, grad_check_with, relative_error, Evaluation, GradCheckReport, Stencil, REL_ERR_FLOOR};
pub use param::{glorot_uniform, ParamBuffer, ParamId, ParamStore};
pub use scalar::Scalar;
pub use tape::{Gradients, Tape, TapeOp, Var};
pub use tensor::Tensor;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("sequence of length {len} is too short, at least {required} needed")]
    TooShort { len: usize, required: usize },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("parameter error: {0}")]
    Param(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}
