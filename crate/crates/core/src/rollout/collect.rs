use log::warn;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::trajectory::{Origin, Step, Trajectory};
use crate::env::{EnvState, Environment};
use crate::error::Result;
use crate::policy::{CriticModel, PolicyModel};
use crate::rng::{substream, tag};
use crate::scalar::Scalar;

/// Roll `policy` from the environment's current state until it is terminal
/// or has taken `horizon` steps since reset.
#[allow(clippy::too_many_arguments)]
pub fn run_episode<S: Scalar, E: Environment>(
    env: &mut E,
    policy: &PolicyModel<S>,
    critic: Option<&CriticModel<S>>,
    horizon: usize,
    gamma: f64,
    origin: Origin,
    config: usize,
    keep_snapshots: bool,
    rng: &mut impl Rng,
) -> Result<Trajectory> {
    let value = |obs: &_| critic.map_or(0.0, |c| c.value(obs).to_f64_lossy());
    let start_region = env.region();
    let mut signature: std::collections::BTreeSet<u32> = start_region.into_iter().collect();
    let mut steps = Vec::new();
    let mut snapshots = Vec::new();
    while !env.is_terminal() && env.elapsed() < horizon {
        if keep_snapshots {
            snapshots.push(env.snapshot());
        }
        let observation = env.observation();
        let probs = policy.action_distribution(&observation);
        let action = crate::policy::sample_categorical(&probs, rng);
        let critic_value = value(&observation);
        let out = env.step(action)?;
        if let Some(r) = out.region {
            signature.insert(r);
        }
        steps.push(Step {
            observation,
            action,
            reward: out.reward,
            behavior_logprob: probs[action].ln().to_f64_lossy(),
            critic_value,
            entropy: crate::scalar::entropy_of(&probs).to_f64_lossy(),
            region: out.region,
        });
    }
    let terminal = env.is_terminal();
    let bootstrap = if terminal { 0.0 } else { value(&env.observation()) };
    let mut t = Trajectory {
        steps,
        terminal,
        success: env.is_success(),
        ret: 0.0,
        gamma,
        start_region,
        signature,
        origin,
        bootstrap,
        config,
        snapshots,
    };
    t.ret = t.recompute_return();
    Ok(t)
}

/// One full episode from each start environment, in parallel; output order
/// follows `starts`. Each start is `(config index, environment at its start state)`.
#[allow(clippy::too_many_arguments)]
pub fn collect_seed_rollouts<S: Scalar, E: Environment>(
    starts: Vec<(usize, E)>,
    policy: &PolicyModel<S>,
    critic: Option<&CriticModel<S>>,
    horizon: usize,
    gamma: f64,
    keep_snapshots: bool,
    root: u64,
    path: &[u64],
) -> Result<Vec<Trajectory>> {
    starts
        .into_par_iter()
        .enumerate()
        .map(|(i, (config, mut env))| {
            let mut p = path.to_vec();
            p.extend([tag::SEED_ROLLOUT, i as u64]);
            let mut rng = substream(root, &p);
            run_episode(&mut env, policy, critic, horizon, gamma, Origin::Seed { index: i }, config, keep_snapshots, &mut rng)
        })
        .collect()
}

/// How rollout states are chosen along a seed trajectory.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RolloutCriterion {
    /// `⌊kT/(p+1)⌋` for `k = 1..p`.
    #[default]
    EqualSpacing,
    /// The `p` steps with the highest policy entropy.
    HighestEntropy,
    /// The `p` steps with the largest absolute one-step TD error.
    HighestTdError,
}

pub fn select_rollout_states(traj: &Trajectory, p: usize) -> Vec<usize> {
    select_rollout_states_by(traj, p, RolloutCriterion::EqualSpacing)
}

/// Strictly increasing step indices (each indexes `traj.snapshots`).
pub fn select_rollout_states_by(traj: &Trajectory, p: usize, criterion: RolloutCriterion) -> Vec<usize> {
    let t_len = traj.len();
    if t_len == 0 || p == 0 {
        return Vec::new();
    }
    let mut out: Vec<usize> = match criterion {
        RolloutCriterion::EqualSpacing => (1..=p).map(|k| k * t_len / (p + 1)).collect(),
        RolloutCriterion::HighestEntropy | RolloutCriterion::HighestTdError => {
            let score = |t: usize| -> f64 {
                let s = &traj.steps[t];
                match criterion {
                    RolloutCriterion::HighestEntropy => s.entropy,
                    _ => {
                        let next = traj.steps.get(t + 1).map_or(traj.bootstrap, |n| n.critic_value);
                        (s.reward + traj.gamma * next - s.critic_value).abs()
                    }
                }
            };
            let mut idx: Vec<usize> = (0..t_len).collect();
            idx.sort_by(|&a, &b| score(b).total_cmp(&score(a)).then(a.cmp(&b)));
            idx.truncate(p);
            idx
        }
    };
    out.sort_unstable();
    out.dedup();
    if out.len() < p {
        warn!("trajectory of length {t_len} supports only {} of {p} rollout states", out.len());
    }
    out
}

/// Vines grown from one rollout state.
#[derive(Clone, Debug)]
pub struct VineBatch {
    pub rollout_state: EnvState,
    pub seed: usize,
    pub timestep: usize,
    pub vines: Vec<Trajectory>,
}

/// A single vine from `state`, drawing actions from the substream at `stream`.
#[allow(clippy::too_many_arguments)]
pub fn grow_vine<S: Scalar, E: Environment>(
    proto: &E,
    state: &EnvState,
    policy: &PolicyModel<S>,
    critic: Option<&CriticModel<S>>,
    horizon: usize,
    gamma: f64,
    origin: Origin,
    config: usize,
    root: u64,
    stream: &[u64],
) -> Result<Trajectory> {
    let mut env = proto.clone();
    env.restore(state)?;
    let mut rng = substream(root, stream);
    run_episode(&mut env, policy, critic, horizon, gamma, origin, config, false, &mut rng)
}

/// `n` vines from the snapshot at step `timestep` of seed trajectory `seed`.
#[allow(clippy::too_many_arguments)]
pub fn grow_vines<S: Scalar, E: Environment>(
    proto: &E,
    seed_traj: &Trajectory,
    seed: usize,
    timestep: usize,
    policy: &PolicyModel<S>,
    critic: Option<&CriticModel<S>>,
    n: usize,
    horizon: usize,
    root: u64,
    path: &[u64],
) -> Result<VineBatch> {
    let state = seed_traj.snapshots.get(timestep).cloned().ok_or_else(|| {
        crate::error::Error::Invalid(format!("seed trajectory has no snapshot at step {timestep}"))
    })?;
    let vines = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut stream = path.to_vec();
            stream.extend([tag::VINE, seed as u64, timestep as u64, j as u64]);
            let origin = Origin::Vine { seed, timestep, vine: j };
            grow_vine(proto, &state, policy, critic, horizon, seed_traj.gamma, origin, seed_traj.config, root, &stream)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(VineBatch { rollout_state: state, seed, timestep, vines })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{two_room_config, Observation, RoomsEnv};
    use crate::policy::Parameterization;
    use rand::SeedableRng;

    fn uniform_policy(env: &RoomsEnv) -> PolicyModel<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        PolicyModel::new(Parameterization::Tabular { capacity: 1 }, &env.obs_spec(), 7, &mut rng)
    }

    fn traj_of_len(t: usize) -> Trajectory {
        let step = Step {
            observation: Observation(vec![]),
            action: 0,
            reward: 0.0,
            behavior_logprob: 0.0,
            critic_value: 0.0,
            entropy: 0.0,
            region: None,
        };
        Trajectory {
            steps: vec![step; t],
            terminal: true,
            success: false,
            ret: 0.0,
            gamma: 1.0,
            start_region: None,
            signature: Default::default(),
            origin: Origin::Seed { index: 0 },
            bootstrap: 0.0,
            config: 0,
            snapshots: Vec::new(),
        }
    }

    #[test]
    fn equal_spacing_examples() {
        assert_eq!(select_rollout_states(&traj_of_len(99), 2), vec![33, 66]);
        assert_eq!(select_rollout_states(&traj_of_len(3), 2), vec![1, 2]);
        assert_eq!(select_rollout_states(&traj_of_len(10), 1), vec![5]);
        assert_eq!(select_rollout_states(&traj_of_len(1), 2), vec![0]);
    }

    #[test]
    fn seed_rollouts_are_deterministic_and_capped() {
        let cfg = two_room_config(0, 100).unwrap();
        let env = RoomsEnv::new(cfg, 3);
        let policy = uniform_policy(&env);
        let starts = || (0..8).map(|i| (0, RoomsEnv::new(env.config().clone(), i))).collect::<Vec<_>>();
        let a = collect_seed_rollouts(starts(), &policy, None, 40, 1.0, true, 9, &[0]).unwrap();
        let b = collect_seed_rollouts(starts(), &policy, None, 40, 1.0, true, 9, &[0]).unwrap();
        assert_eq!(a.len(), 8);
        assert_eq!(a, b);
        for t in &a {
            assert!(t.len() <= 40);
            assert_eq!(t.snapshots.len(), t.len());
            assert_eq!(t.signature, t.recompute_signature());
            assert!(t.steps.iter().all(|s| s.behavior_logprob.is_finite()));
        }
    }

    #[test]
    fn vines_share_start_and_are_reproducible_alone() {
        let cfg = two_room_config(1, 100).unwrap();
        let env = RoomsEnv::new(cfg, 3);
        let policy = uniform_policy(&env);
        let seeds = collect_seed_rollouts(vec![(0, env.clone())], &policy, None, 100, 1.0, true, 1, &[]).unwrap();
        let t = select_rollout_states(&seeds[0], 2)[0];
        let batch = grow_vines(&env, &seeds[0], 0, t, &policy, None, 8, 100, 1, &[7]).unwrap();
        assert_eq!(batch.vines.len(), 8);
        let first = &batch.vines[0].steps[0].observation;
        assert!(batch.vines.iter().all(|v| &v.steps[0].observation == first));
        let alone = grow_vine(
            &env,
            &batch.rollout_state,
            &policy,
            None,
            100,
            1.0,
            Origin::Vine { seed: 0, timestep: t, vine: 5 },
            0,
            1,
            &[7, tag::VINE, 0, t as u64, 5],
        )
        .unwrap();
        assert_eq!(alone, batch.vines[5]);
    }
}
