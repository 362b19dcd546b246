use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::OptimizerKind;
use crate::rollout::RolloutCriterion;
use crate::setobj::{DiversityKind, SetObjective};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Standard PPO on independent start-state trajectories with GAE.
    Ppo,
    /// Vine sampling with set-scored advantages at rollout states.
    PolyPpo,
    /// One policy-gradient step per batch with a mean-return baseline.
    Reinforce,
}

impl Method {
    pub fn uses_vines(self) -> bool {
        self == Method::PolyPpo
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Ppo => "ppo",
            Method::PolyPpo => "poly_ppo",
            Method::Reinforce => "reinforce",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UcbReset {
    /// Counts accumulate over the whole run.
    #[default]
    Global,
    PerIteration,
}

/// Every knob of a fine-tuning run. Defaults are the published hyperparameters
/// (window 5, the rooms value).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub method: Method,
    pub iterations: usize,
    pub seed: u64,
    pub ppo_epochs: usize,
    pub minibatch: usize,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_eps: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub value_coef: f64,
    pub kl_coef: f64,
    pub max_grad_norm: f64,
    pub temperature: f64,
    /// Seed trajectories, and vines per rollout state (N).
    pub vines: usize,
    /// Set size (n).
    pub set_size: usize,
    /// Sets per rollout state (M).
    pub num_sets: usize,
    /// Rollout states per seed trajectory (p).
    pub rollout_states: usize,
    /// Steps after a rollout state that take the set advantage (W).
    pub window: usize,
    /// Trajectory budget per iteration (B).
    pub budget: usize,
    /// Exploration bonus weight; 0 disables it.
    pub ucb_lambda: f64,
    pub ucb_reset: UcbReset,
    pub optimizer: OptimizerKind,
    pub rollout_criterion: RolloutCriterion,
    pub set_objective: SetObjective,
    pub diversity: DiversityKind,
    /// Redraw repeated sets at a rollout state when enough distinct sets exist.
    pub distinct_sets: bool,
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            method: Method::PolyPpo,
            iterations: 300,
            seed: 0,
            ppo_epochs: 2,
            minibatch: 64,
            gamma: 1.0,
            gae_lambda: 0.95,
            clip_eps: 0.2,
            actor_lr: 1e-5,
            critic_lr: 1e-4,
            value_coef: 0.5,
            kl_coef: 0.01,
            max_grad_norm: 0.5,
            temperature: 1.0,
            vines: 8,
            set_size: 4,
            num_sets: 4,
            rollout_states: 2,
            window: 5,
            budget: 136,
            ucb_lambda: 0.0,
            ucb_reset: UcbReset::Global,
            optimizer: OptimizerKind::Sgd,
            rollout_criterion: RolloutCriterion::EqualSpacing,
            set_objective: SetObjective::Polychromic,
            diversity: DiversityKind::Signature,
            distinct_sets: true,
            checkpoint_every: 10,
        }
    }
}

/// The KL coefficients swept per environment.
pub const KL_SWEEP: [f64; 4] = [0.005, 0.01, 0.05, 0.1];

impl TrainConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.vines <= self.set_size {
            return fail(format!("need N > n, got N={} n={}", self.vines, self.set_size));
        }
        if self.set_size == 0 {
            return fail("set size must be positive".into());
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return fail(format!("gamma {} outside (0, 1]", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return fail(format!("GAE lambda {} outside [0, 1]", self.gae_lambda));
        }
        if !(self.clip_eps > 0.0) {
            return fail(format!("clip epsilon must be positive, got {}", self.clip_eps));
        }
        if self.num_sets < 2 {
            return fail("need at least two sets per rollout state".into());
        }
        if self.rollout_states == 0 {
            return fail("need at least one rollout state".into());
        }
        if self.minibatch == 0 || self.ppo_epochs == 0 {
            return fail("minibatch size and epoch count must be positive".into());
        }
        if !(self.temperature > 0.0) {
            return fail("temperature must be positive".into());
        }
        if self.kl_coef < 0.0 || self.ucb_lambda < 0.0 || self.value_coef < 0.0 {
            return fail("coefficients must be nonnegative".into());
        }
        if !(self.max_grad_norm > 0.0) {
            return fail("max grad norm must be positive".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_round_trip() {
        let c = TrainConfig::default();
        c.validate().unwrap();
        assert_eq!(TrainConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn partial_toml_overrides() {
        let c = TrainConfig::from_toml("method = \"ppo\"\nwindow = 0\nkl_coef = 0.05\n").unwrap();
        assert_eq!(c.method, Method::Ppo);
        assert_eq!(c.window, 0);
        assert_eq!(c.vines, 8);
    }

    #[test]
    fn rejects_invalid() {
        assert!(TrainConfig::from_toml("vines = 4\n").is_err());
        assert!(TrainConfig::from_toml("gamma = 0.0\n").is_err());
        assert!(TrainConfig::from_toml("clip_eps = 0.0\n").is_err());
        assert!(TrainConfig::from_toml("bogus = 1\n").is_err());
    }
}
