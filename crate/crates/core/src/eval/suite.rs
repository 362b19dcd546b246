use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::passk::pass_at_k;
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::policy::PolicyModel;
use crate::rng::{child_seed, substream, tag};
use crate::rollout::{run_episode, Origin, Trajectory};
use crate::scalar::Scalar;
use crate::setobj::diversity;

/// Version of serialized evaluation reports.
pub const EVAL_SCHEMA: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigEval {
    pub config: usize,
    pub rollouts: usize,
    pub successes: usize,
    pub mean_return: f64,
    /// Mean diversity over consecutive groups of `set_size` rollouts.
    pub set_diversity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema: u32,
    pub per_config: Vec<ConfigEval>,
    pub success_rate: f64,
    pub mean_return: f64,
    /// Fraction of configurations with at least one success.
    pub solved_fraction: f64,
    pub k_grid: Vec<usize>,
    /// pass@k averaged over configurations, aligned with `k_grid`.
    pub pass_at_k: Vec<f64>,
    pub set_size: usize,
    pub set_diversity: f64,
}

/// `rollouts` independent episodes per configuration. Episode `j` of config
/// `c` uses its own stream, so results do not depend on thread scheduling.
pub fn evaluation_rollouts<S: Scalar, E: Environment>(
    policy: &PolicyModel<S>,
    suite: &[E],
    rollouts: usize,
    seed: u64,
) -> Result<Vec<Vec<Trajectory>>> {
    suite
        .par_iter()
        .enumerate()
        .map(|(c, proto)| {
            (0..rollouts)
                .map(|j| {
                    let mut env = proto.clone();
                    env.reset_with_seed(child_seed(seed, &[tag::EVAL, c as u64, j as u64]));
                    let mut rng = substream(seed, &[tag::EVAL, c as u64, j as u64, 1]);
                    let h = env.horizon();
                    run_episode(&mut env, policy, None, h, 1.0, Origin::Seed { index: j }, c, false, &mut rng)
                })
                .collect()
        })
        .collect()
}

fn set_diversity_of(trajs: &[Trajectory], n: usize) -> f64 {
    let groups: Vec<f64> = trajs
        .chunks_exact(n.max(1))
        .map(|g| diversity::<f64, _>(&g.iter().map(|t| &t.signature).collect::<Vec<_>>()))
        .collect();
    if groups.is_empty() {
        0.0
    } else {
        groups.iter().sum::<f64>() / groups.len() as f64
    }
}

/// Success, return, pass@k and set diversity from pre-collected rollouts.
pub fn summarize(per_config: &[Vec<Trajectory>], k_grid: &[usize], set_size: usize) -> Result<EvalReport> {
    if per_config.is_empty() {
        return Err(Error::Invalid("no configurations to evaluate".into()));
    }
    let mut configs = Vec::with_capacity(per_config.len());
    let mut pass = vec![0.0; k_grid.len()];
    for (c, trajs) in per_config.iter().enumerate() {
        let r = trajs.len();
        if let Some(&k) = k_grid.iter().find(|&&k| k > r) {
            return Err(Error::Invalid(format!("k = {k} exceeds the {r} rollouts per configuration")));
        }
        let successes = trajs.iter().filter(|t| t.success).count();
        for (acc, &k) in pass.iter_mut().zip(k_grid) {
            *acc += pass_at_k(successes, r, k)? / per_config.len() as f64;
        }
        configs.push(ConfigEval {
            config: c,
            rollouts: r,
            successes,
            mean_return: trajs.iter().map(|t| t.ret).sum::<f64>() / r.max(1) as f64,
            set_diversity: set_diversity_of(trajs, set_size),
        });
    }
    let k = configs.len() as f64;
    let report = EvalReport {
        schema: EVAL_SCHEMA,
        success_rate: configs.iter().map(|c| c.successes as f64 / c.rollouts.max(1) as f64).sum::<f64>() / k,
        mean_return: configs.iter().map(|c| c.mean_return).sum::<f64>() / k,
        solved_fraction: configs.iter().filter(|c| c.successes > 0).count() as f64 / k,
        set_diversity: configs.iter().map(|c| c.set_diversity).sum::<f64>() / k,
        per_config: configs,
        k_grid: k_grid.to_vec(),
        pass_at_k: pass,
        set_size,
    };
    if k_grid.windows(2).all(|w| w[0] < w[1]) {
        debug_assert!(report.pass_at_k.windows(2).all(|w| w[0] <= w[1] + 1e-12));
    }
    Ok(report)
}

/// Roll out `policy` on every configuration and summarize.
pub fn evaluate_suite<S: Scalar, E: Environment>(
    policy: &PolicyModel<S>,
    suite: &[E],
    rollouts: usize,
    k_grid: &[usize],
    set_size: usize,
    seed: u64,
) -> Result<EvalReport> {
    summarize(&evaluation_rollouts(policy, suite, rollouts, seed)?, k_grid, set_size)
}
