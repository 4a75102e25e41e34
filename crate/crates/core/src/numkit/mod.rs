//! Dense-vector numerics: arrays, a gradient tape, the layers built on it,
//! losses, optimizers, seeded randomness and a finite-difference checker.

mod array;
pub mod gradcheck;
pub mod gru;
mod loss;
pub mod optim;
mod params;
pub mod rng;
pub mod tape;

pub use array::{argmax, masked_argmax, Array};
pub use gradcheck::{grad_check, GradCheckConfig, GradCheckReport};
pub use gru::{gru_cell, gru_step, init_gru, GRU_BLOCKS};
pub use loss::{loss, LossKind};
pub use optim::{Optimizer, OptimizerConfig};
pub use params::{Grads, Param, ParamSet};
pub use rng::Rng;
pub use tape::{affine, sigmoid, softmax, Tape, Var};
