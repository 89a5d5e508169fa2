//! Dense tensors, a reverse-mode tape with the operators the attention
//! model needs, and the Adam optimizer.

mod adam;
mod tape;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use tape::{normalize_rows, segment_softmax_values, sigmoid, Tape, Var, BCE_CLIP};
pub use tensor::Tensor;
