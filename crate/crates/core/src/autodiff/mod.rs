//! Minimal reverse-mode differentiation engine.
//!
//! Exactly the operations the models need: matrix multiply, valid (unpadded)
//! cross-correlation, ReLU, label-smoothed softmax cross-entropy, a row-bias
//! broadcast, constant scaling, addition and reshape. Forward passes record
//! onto a [`Graph`]; [`Graph::backward`] replays adjoints in exact reverse
//! execution order. Analytic gradients are self-verified against central
//! finite differences by [`finite_diff_check`].
//!
//! All arithmetic is 64-bit and sequential, so identical inputs produce
//! bit-identical outputs.

mod check;
mod graph;
mod tensor;


pub use check::{finite_diff_check, DEFAULT_FD_STEP};
pub use graph::{Graph, NodeId};
pub use tensor::Tensor;
