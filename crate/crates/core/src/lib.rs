// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod advantage;
pub mod env;
pub mod error;
pub mod eval;
pub mod policy;
pub mod rng;
pub mod rollout;
pub mod scalar;
pub mod setobj;
pub mod theory;
pub mod train;

pub use error::{Error, Result};

/// Double-precision aliases for the generic models.
pub type Policy = policy::PolicyModel<f64>;
pub type Critic = policy::CriticModel<f64>;
pub type Gradient = policy::GradientVector<f64>;
pub type Optimizer = policy::Optimizer<f64>;
pub type RoomsTrainer = train::Trainer<f64, env::RoomsEnv>;
