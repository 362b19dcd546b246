//! Behavior cloning: cross-entropy with an entropy bonus.

use log::debug;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::model::{GradientVector, PolicyModel};
use super::optim::{Optimizer, OptimizerKind};
use crate::env::{Dataset, Demo};
use crate::error::{Error, Result};
use crate::rng::{substream, tag};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BcConfig {
    pub epochs: usize,
    pub lr: f64,
    pub entropy_coef: f64,
    pub batch_size: usize,
    /// Fraction held out to measure generalization.
    pub holdout: f64,
    pub optimizer: OptimizerKind,
    pub seed: u64,
}

impl Default for BcConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            lr: 1e-2,
            entropy_coef: 0.0,
            batch_size: 64,
            holdout: 0.2,
            optimizer: OptimizerKind::Adam,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BcReport {
    pub initial_holdout_ce: f64,
    pub final_holdout_ce: f64,
    pub epoch_train_loss: Vec<f64>,
    pub steps: usize,
}

/// Mean negative log-likelihood of the demonstrated actions.
pub fn cross_entropy<S: Scalar>(policy: &PolicyModel<S>, demos: &[Demo]) -> f64 {
    if demos.is_empty() {
        return 0.0;
    }
    let total: f64 = demos
        .iter()
        .map(|d| -policy.log_prob(&d.observation, d.action).to_f64_lossy())
        .sum();
    total / demos.len() as f64
}

/// Fit `policy` to `data` in place.
pub fn pretrain_bc<S: Scalar>(policy: &mut PolicyModel<S>, data: &Dataset, cfg: &BcConfig) -> Result<BcReport> {
    if data.is_empty() {
        return Err(Error::Config("behavior cloning needs a nonempty dataset".into()));
    }
    let mut rng = substream(cfg.seed, &[tag::PRETRAIN]);
    let (train, held) = if data.len() >= 5 && cfg.holdout > 0.0 {
        data.split(cfg.holdout, &mut rng)
    } else {
        (data.clone(), data.clone())
    };
    for d in &train.demos {
        policy.prepare(&d.observation);
    }
    let initial = cross_entropy(policy, &held.demos);
    let mut opt = Optimizer::new(cfg.optimizer, S::of(cfg.lr), None);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut epoch_train_loss = Vec::with_capacity(cfg.epochs);
    let mut steps = 0;
    let ent = S::of(cfg.entropy_coef);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size.max(1)) {
            let mut grad = GradientVector::zeros(policy.param_count());
            let w = S::one() / S::of_usize(batch.len());
            let mut loss = 0.0;
            for &i in batch {
                let d = &train.demos[i];
                loss -= policy.log_prob(&d.observation, d.action).to_f64_lossy();
                loss -= cfg.entropy_coef * policy.entropy(&d.observation).to_f64_lossy();
                policy.accumulate_logprob_grad(&d.observation, d.action, -w, &mut grad.0);
                if cfg.entropy_coef != 0.0 {
                    policy.accumulate_entropy_grad(&d.observation, -w * ent, &mut grad.0);
                }
            }
            if !loss.is_finite() || !grad.is_finite() {
                return Err(Error::Divergence { step: steps, what: "behavior-cloning loss".into() });
            }
            opt.step(policy.params_mut(), &mut grad);
            epoch_loss += loss;
            steps += 1;
        }
        let mean = epoch_loss / train.len() as f64;
        debug!("bc epoch {epoch}: train loss {mean:.4}");
        epoch_train_loss.push(mean);
    }
    policy.check_finite()?;
    Ok(BcReport {
        initial_holdout_ce: initial,
        final_holdout_ce: cross_entropy(policy, &held.demos),
        epoch_train_loss,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{Environment, Observation, ObsSpec};
    use crate::policy::Parameterization;
    use rand::SeedableRng;

    fn single_pair() -> Dataset {
        Dataset {
            demos: vec![Demo { observation: Observation(vec![1, 0]), action: 2, source: 0 }],
            num_actions: 4,
            ..Dataset::default()
        }
    }

    fn model(param: Parameterization) -> PolicyModel<f64> {
        let spec = ObsSpec { cardinalities: vec![3, 2] };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        PolicyModel::new(param, &spec, 4, &mut rng)
    }

    #[test]
    fn overfits_single_pair() {
        for param in [Parameterization::Tabular { capacity: 8 }, Parameterization::Mlp { hidden: 6 }] {
            let mut p = model(param);
            let cfg = BcConfig { epochs: 300, lr: 0.05, ..BcConfig::default() };
            pretrain_bc(&mut p, &single_pair(), &cfg).unwrap();
            assert!(p.action_distribution(&Observation(vec![1, 0]))[2] > 0.9);
        }
    }

    #[test]
    fn strong_entropy_bonus_keeps_policy_near_uniform() {
        let mut p = model(Parameterization::Tabular { capacity: 8 });
        let cfg = BcConfig { epochs: 300, lr: 0.05, entropy_coef: 20.0, ..BcConfig::default() };
        pretrain_bc(&mut p, &single_pair(), &cfg).unwrap();
        let h = p.entropy(&Observation(vec![1, 0]));
        assert!(h > 0.95 * 4f64.ln(), "entropy {h}");
    }

    #[test]
    fn holdout_loss_decreases_on_triangle_data() {
        let g = crate::env::random_graph(0, 12, 0.4, 2).unwrap();
        let data = crate::env::generate_triangle_data(&[g.clone()], 200, 3).unwrap();
        let env = crate::env::TriangleEnv::new(g);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let mut p: PolicyModel<f64> =
            PolicyModel::new(Parameterization::Mlp { hidden: 16 }, &env.obs_spec(), 12, &mut rng);
        let report = pretrain_bc(&mut p, &data, &BcConfig { epochs: 10, ..BcConfig::default() }).unwrap();
        assert!(report.final_holdout_ce < report.initial_holdout_ce);
    }
}
