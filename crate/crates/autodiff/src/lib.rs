//! Reverse-mode automatic differentiation over dense `f64` tensors.
//!
//! Backward rules are expressed with the same differentiable operations as
//! the forward pass, so [`grad`] with `create_graph = true` yields gradients
//! that can themselves be differentiated (needed for gradient penalties).

mod backward;
pub mod numeric;
mod ops;
mod shape;
mod tensor;

pub use backward::grad;
pub use ops::argmax;
pub use tensor::{is_grad_enabled, no_grad, set_grad_enabled, BackwardCtx, GradModeGuard, Tensor};
