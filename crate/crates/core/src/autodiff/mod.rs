//! Minimal reverse-mode automatic differentiation.
//!
//! Values live in [`Tensor`]s; a [`Tape`] records each operation as it is
//! evaluated and replays the record backwards to produce adjoints. The op set
//! is just large enough for MLP actors and critics and the policy objectives
//! built on top of them.

mod mlp;
mod optim;
mod tape;
mod tensor;

pub use mlp::Mlp;
pub use optim::{Optimizer, OptimizerKind, StepOutcome, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use tape::{grad, Gradients, Op, Tape, Var};
pub use tensor::Tensor;
