//! Softmax policies and critics with analytic gradients, plus behavior cloning.

mod bc;
mod body;
mod checkpoint;
mod model;
mod optim;

pub use bc::{cross_entropy, pretrain_bc, BcConfig, BcReport};
pub use body::{Body, Parameterization};
pub use checkpoint::{
    critic_from_bytes, critic_to_bytes, load_critic, load_policy, policy_from_bytes, policy_to_bytes,
    save_critic, save_policy,
};
pub use model::{sample_categorical, CriticModel, GradientVector, PolicyModel};
pub use optim::{Optimizer, OptimizerKind, OptimizerState};
