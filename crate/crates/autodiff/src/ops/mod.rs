mod arith;
mod conv;
mod layout;
pub(crate) mod linalg;
mod reduce;

pub use reduce::argmax;
