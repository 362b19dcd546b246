use std::collections::BTreeSet;

use log::warn;
use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{Dir, EnvState, Environment, RoomsEnv};
use crate::error::Result;
use crate::policy::PolicyModel;
use crate::rng::{child_seed, substream, tag};
use crate::rollout::{run_episode, Origin};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbedConfig {
    pub config: usize,
    /// Rooms reached by the exploratory rollouts, in increasing order.
    pub rooms: Vec<u32>,
    pub starts: Vec<EnvState>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSuite {
    pub configs: Vec<PerturbedConfig>,
}

impl PerturbationSuite {
    pub fn len(&self) -> usize {
        self.configs.iter().map(|c| c.starts.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

const PLACEMENT_ATTEMPTS: usize = 64;

/// Rooms reached by `rollouts` episodes of `policy` at `temperature`, and up to
/// `per_room` solvable start states in each (distinct free cells, random heading).
#[allow(clippy::too_many_arguments)]
pub fn perturb_config<S: Scalar>(
    policy: &PolicyModel<S>,
    env: &RoomsEnv,
    config: usize,
    temperature: f64,
    rollouts: usize,
    per_room: usize,
    seed: u64,
) -> Result<PerturbedConfig> {
    let mut hot = policy.clone();
    hot.temperature = S::of(temperature);
    let mut rooms = BTreeSet::new();
    for j in 0..rollouts {
        let mut e = env.clone();
        e.reset_with_seed(child_seed(seed, &[tag::PERTURB, config as u64, j as u64]));
        let mut rng = substream(seed, &[tag::PERTURB, config as u64, j as u64, 1]);
        let h = e.horizon();
        let t = run_episode(&mut e, &hot, None, h, 1.0, Origin::Seed { index: j }, config, false, &mut rng)?;
        rooms.extend(t.signature.iter().copied());
    }
    let mut rng = substream(seed, &[tag::PERTURB, config as u64, u64::MAX]);
    let mut starts = Vec::new();
    for &room in &rooms {
        let cells = env.config().free_cells(room);
        if cells.is_empty() {
            warn!("room {room} of config {config} has no free cell; skipped");
            continue;
        }
        let mut placed = 0;
        let mut tries = 0;
        let mut order: Vec<usize> = sample(&mut rng, cells.len(), cells.len()).into_vec();
        while placed < per_room && tries < PLACEMENT_ATTEMPTS {
            tries += 1;
            let Some(ci) = order.pop() else { break };
            let dir = Dir::from_index(rng.gen_range(0..4));
            let mut e = env.clone();
            e.place_agent(cells[ci], dir)?;
            if e.plan().is_none_or(|p| p.is_empty()) {
                warn!("start {:?} in room {room} of config {config} is unsolvable or already solved; resampling", cells[ci]);
                continue;
            }
            starts.push(e.snapshot());
            placed += 1;
        }
    }
    Ok(PerturbedConfig { config, rooms: rooms.into_iter().collect(), starts })
}

/// Perturbed starts for every configuration in `envs`.
pub fn build_perturbation_suite<S: Scalar>(
    policy: &PolicyModel<S>,
    envs: &[RoomsEnv],
    temperature: f64,
    rollouts: usize,
    per_room: usize,
    seed: u64,
) -> Result<PerturbationSuite> {
    let configs = envs
        .par_iter()
        .enumerate()
        .map(|(c, e)| perturb_config(policy, e, c, temperature, rollouts, per_room, seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(PerturbationSuite { configs })
}

/// pass@1 over all perturbed starts: one rollout each.
pub fn perturbation_eval<S: Scalar>(
    policy: &PolicyModel<S>,
    envs: &[RoomsEnv],
    suite: &PerturbationSuite,
    seed: u64,
) -> Result<f64> {
    if suite.is_empty() {
        return Ok(0.0);
    }
    let successes: Vec<usize> = suite
        .configs
        .par_iter()
        .map(|pc| {
            let mut ok = 0;
            for (j, st) in pc.starts.iter().enumerate() {
                let mut e = envs[pc.config].clone();
                e.restore(st)?;
                let mut rng = substream(seed, &[tag::PERTURB, tag::EVAL, pc.config as u64, j as u64]);
                let h = e.horizon();
                let t = run_episode(&mut e, policy, None, h, 1.0, Origin::Seed { index: j }, pc.config, false, &mut rng)?;
                ok += t.success as usize;
            }
            Ok(ok)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(successes.iter().sum::<usize>() as f64 / suite.len() as f64)
}
