//! Policy-optimization laboratory core.
//!
//! The crate bundles a small reverse-mode autodiff engine, diagonal-Gaussian
//! policy math (closed-form KL and its asymmetry), correntropy and the
//! correntropy induced metric (CIM), two native control environments, and
//! three PPO variants: clipped surrogate, adaptive KL penalty, and CIM penalty.

pub mod autodiff;
pub mod correntropy;
pub mod envs;
pub mod error;
pub mod gaussian;
pub mod numeric;
pub mod ppo;

pub use error::{Error, Result};
