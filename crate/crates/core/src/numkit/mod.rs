//! Dense numeric kernel: matrices, masked softmax, scaled dot-product
//! attention with its backward pass, binary cross-entropy, Adam, and a
//! finite-difference gradient checker.

mod adam;
mod attention;
mod gradcheck;
mod loss;
mod matrix;

pub use adam::{adam_step, AdamState};
pub use attention::{
    masked_softmax_backward, masked_softmax_rows, scaled_dot_attention,
    scaled_dot_attention_backward, Attention, AttentionGrads,
};
pub use gradcheck::grad_check;
pub use loss::{bce_grad, bce_loss, sigmoid, PROB_CLAMP};
pub use matrix::{dot, Matrix};
