//! Fine-tuning: PPO losses, the vine-sampled set-advantage loop and its
//! baselines, and run orchestration with checkpoints and metrics.

mod config;
mod loss;
mod run;
mod trainer;

pub use config::{Method, TrainConfig, UcbReset, KL_SWEEP};
pub use loss::{kl_penalty, ppo_loss, reinforce_gradient, reinforce_update, value_loss, SurrogateTerms, UpdateSample};
pub use run::{
    read_metrics, resume, save_checkpoint, sweep_kl, train_run, CONFIG_FILE, CRITIC_FILE, METRICS_FILE, POLICY_FILE,
    STATE_FILE,
};
pub use trainer::{
    samples_from_records, source_counts, surrogate_direction, Batch, IterationReport, Trainer, TrainerState,
    METRICS_SCHEMA,
};
