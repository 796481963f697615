//! Minimal reverse-mode automatic differentiation over dense `f64` arrays.

pub mod array;
pub mod checkpoint;
pub mod gradcheck;
pub mod params;
pub mod tape;

pub use array::Array;
pub use checkpoint::Checkpoint;
pub use gradcheck::grad_check;
pub use params::{ParamId, ParamStore};
pub use tape::{log_softmax, softmax, Gradients, Tape, Var};
