//! Minimal reverse-mode differentiation over dense f64 matrices.

pub mod gradcheck;
pub mod tape;
pub mod tensor;

pub use gradcheck::grad_check;
pub use tape::{Gradients, Tape, Var};
pub use tensor::{central_moment, frobenius_norm_sq, softmax_row, Tensor2};
