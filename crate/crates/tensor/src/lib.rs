//! Dense `f64` tensors with reverse-mode differentiation.
//!
//! This is intentionally a narrow engine: it implements the operations an
//! equivariant message-passing stack needs (matmul, broadcasting arithmetic,
//! row gather/scatter, segment softmax, row norms) plus MLPs, a named
//! parameter store and a binary parameter container.

pub mod container;
pub mod error;
pub mod gradcheck;
pub mod mlp;
pub mod params;
pub mod tape;
pub mod tensor;

pub use container::{load_params, read_params, save_params, write_params};
pub use error::{Result, TensorError};
pub use gradcheck::{finite_difference_check, FdReport};
pub use mlp::{Activation, Linear, Mlp};
pub use params::{Bound, ParamId, ParamStore};
pub use tape::{sigmoid, softplus, Gradients, Index, Tape, Var};
pub use tensor::Tensor;
