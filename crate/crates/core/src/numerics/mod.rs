//! Dense tensors, a parameter store, tape-based reverse-mode gradients, Adam,
//! and finite-difference verification. Double precision throughout.

mod adam;
mod gradcheck;
pub mod ops;
mod params;
mod tape;
mod tensor;

pub use adam::{adam_step, AdamState};
pub use gradcheck::{check_tape_gradients, finite_difference_check, relative_error, GradCheckReport, RELATIVE_FLOOR};
pub use params::{init_uniform, CheckpointMeta, ParamId, ParamStore};
pub use tape::{Tape, Var};
pub use tensor::Tensor;
