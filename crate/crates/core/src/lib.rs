//! Generalist Equivariant Transformer: bilevel complex representation,
//! E(3)-equivariant encoder layers, task heads, symmetry audits and training.

pub mod audit;
pub mod complex_json;
pub mod error;
pub mod heads;
pub mod layers;
pub mod metrics;
pub mod model;
pub mod pdb;
pub mod repr;
pub mod synthetic;
pub mod trainer;
pub mod vocab;

pub use error::{GetError, Result};
