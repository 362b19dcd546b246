//! Advantage assembly: GAE, windowed polychromic advantages, normalization
//! and the visit-count exploration bonus.

use std::collections::HashMap;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::env::{ActionId, Observation};
use crate::error::{Error, Result};
use crate::rollout::{Trajectory, VineBatch};
use crate::scalar::Scalar;
use crate::setobj::SetSample;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdvantageSource {
    Gae,
    Polychromic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdvantageRecord {
    pub trajectory: usize,
    pub step: usize,
    pub advantage: f64,
    pub source: AdvantageSource,
    /// Critic regression target `R̂_t`.
    pub target: f64,
    pub behavior_logprob: f64,
}

/// `(A_t, R̂_t)` with `A_t = Σ_l (γλ)^l δ_{t+l}` and `R̂_t = A_t + V(s_t)`.
/// `bootstrap` is `V(s_T)`, zero for terminal trajectories.
pub fn gae<S: Scalar>(rewards: &[S], values: &[S], bootstrap: S, gamma: S, lambda: S) -> Vec<(S, S)> {
    let t_len = rewards.len();
    let mut out = vec![(S::zero(), S::zero()); t_len];
    let mut acc = S::zero();
    for t in (0..t_len).rev() {
        let next = if t + 1 < t_len { values[t + 1] } else { bootstrap };
        let delta = rewards[t] + gamma * next - values[t];
        acc = delta + gamma * lambda * acc;
        out[t] = (acc, acc + values[t]);
    }
    out
}

pub fn gae_trajectory(traj: &Trajectory, gamma: f64, lambda: f64) -> Vec<(f64, f64)> {
    let r: Vec<f64> = traj.steps.iter().map(|s| s.reward).collect();
    let v: Vec<f64> = traj.steps.iter().map(|s| s.critic_value).collect();
    gae(&r, &v, traj.bootstrap, gamma, lambda)
}

/// GAE records for every step of `traj`.
pub fn gae_records(traj: &Trajectory, id: usize, gamma: f64, lambda: f64) -> Vec<AdvantageRecord> {
    gae_trajectory(traj, gamma, lambda)
        .into_iter()
        .enumerate()
        .map(|(t, (a, target))| AdvantageRecord {
            trajectory: id,
            step: t,
            advantage: a,
            source: AdvantageSource::Gae,
            target,
            behavior_logprob: traj.steps[t].behavior_logprob,
        })
        .collect()
}

/// Per-vine set advantage: mean over the containing sets of
/// `score(g) − mean(scores)`; `None` for vines in no set.
pub fn set_advantages(n_vines: usize, sets: &[SetSample], scores: &[f64]) -> Result<Vec<Option<f64>>> {
    if sets.len() != scores.len() {
        return Err(Error::Invalid(format!("{} sets but {} scores", sets.len(), scores.len())));
    }
    if sets.len() < 2 {
        return Err(Error::Invalid("the Monte Carlo baseline needs at least two sets".into()));
    }
    let baseline = scores.iter().sum::<f64>() / scores.len() as f64;
    let mut sum = vec![0.0; n_vines];
    let mut count = vec![0usize; n_vines];
    for (set, &score) in sets.iter().zip(scores) {
        for &m in &set.members {
            sum[m] += score - baseline;
            count[m] += 1;
        }
    }
    Ok(sum
        .into_iter()
        .zip(count)
        .map(|(s, c)| (c > 0).then(|| s / c as f64))
        .collect())
}

/// One record per step of every vine in `batch`: the set advantage on steps
/// `0..=window` of member vines, GAE elsewhere. `first_id` numbers the vines.
pub fn polychromic_advantages(
    batch: &VineBatch,
    sets: &[SetSample],
    scores: &[f64],
    window: i64,
    gamma: f64,
    lambda: f64,
    first_id: usize,
) -> Result<Vec<AdvantageRecord>> {
    if window < 0 {
        return Err(Error::Config(format!("window must be nonnegative, got {window}")));
    }
    let per_vine = set_advantages(batch.vines.len(), sets, scores)?;
    let mut out = Vec::new();
    for (j, vine) in batch.vines.iter().enumerate() {
        let mut recs = gae_records(vine, first_id + j, gamma, lambda);
        if let Some(a) = per_vine[j] {
            for r in recs.iter_mut().take(window as usize + 1) {
                r.advantage = a;
                r.source = AdvantageSource::Polychromic;
            }
        }
        out.extend(recs);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SourceStats {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: f64,
    pub std: f64,
    pub gae: SourceStats,
    pub polychromic: SourceStats,
    pub degenerate: bool,
}

fn stats(values: impl Iterator<Item = f64> + Clone) -> SourceStats {
    let count = values.clone().count();
    if count == 0 {
        return SourceStats::default();
    }
    let mean = values.clone().sum::<f64>() / count as f64;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / count as f64;
    SourceStats { count, mean, std: var.sqrt() }
}

/// Standardize advantages with one pooled mean and population std.
pub fn normalize_advantages(records: &mut [AdvantageRecord]) -> NormStats {
    let of = |src: AdvantageSource| {
        stats(records.iter().filter(move |r| r.source == src).map(|r| r.advantage))
    };
    let gae = of(AdvantageSource::Gae);
    let polychromic = of(AdvantageSource::Polychromic);
    let all = stats(records.iter().map(|r| r.advantage));
    let degenerate = records.len() < 2 || !(all.std > 1e-12);
    if degenerate {
        warn!("advantage batch has zero variance over {} records; left unnormalized", records.len());
    } else {
        for r in records.iter_mut() {
            r.advantage = (r.advantage - all.mean) / all.std;
        }
    }
    NormStats { mean: all.mean, std: all.std, gae, polychromic, degenerate }
}

/// Global count of how often each action was sampled in each state.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct VisitCounts {
    counts: HashMap<(Observation, ActionId), u64>,
}

impl VisitCounts {
    pub fn get(&self, obs: &Observation, action: ActionId) -> u64 {
        self.counts.get(&(obs.clone(), action)).copied().unwrap_or(0)
    }

    pub fn increment(&mut self, obs: &Observation, action: ActionId) {
        *self.counts.entry((obs.clone(), action)).or_insert(0) += 1;
    }

    pub fn record(&mut self, traj: &Trajectory) {
        for s in &traj.steps {
            self.increment(&s.observation, s.action);
        }
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn clear(&mut self) {
        self.counts.clear();
    }

    pub fn bonus(&self, obs: &Observation, action: ActionId, lambda_ucb: f64) -> f64 {
        ucb_bonus(self.get(obs, action), lambda_ucb)
    }

    /// Entries sorted by key, for stable serialization.
    pub fn entries(&self) -> Vec<(Observation, ActionId, u64)> {
        let mut v: Vec<_> = self.counts.iter().map(|((o, a), &c)| (o.clone(), *a, c)).collect();
        v.sort();
        v
    }

    pub fn from_entries(entries: Vec<(Observation, ActionId, u64)>) -> Self {
        Self { counts: entries.into_iter().map(|(o, a, c)| ((o, a), c)).collect() }
    }
}

/// `λ · min(1, N^{-1/2})`, equal to `λ` when unvisited.
pub fn ucb_bonus(count: u64, lambda_ucb: f64) -> f64 {
    if count == 0 {
        lambda_ucb
    } else {
        lambda_ucb * (1.0f64).min(1.0 / (count as f64).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gae_limits() {
        let r = [0.0f64, 0.0, 1.0];
        let v = [0.2, 0.5, 0.7];
        let zero = gae(&r, &v, 0.0, 0.9, 0.0);
        assert!((zero[0].0 - (0.9 * 0.5 - 0.2)).abs() < 1e-15);
        assert!((zero[2].0 - (1.0 - 0.7)).abs() < 1e-15);
        let mc = gae(&r, &v, 0.0, 1.0, 1.0);
        for t in 0..3 {
            let tail: f64 = r[t..].iter().sum();
            assert!((mc[t].0 - (tail - v[t])).abs() < 1e-15);
            assert!((mc[t].1 - tail).abs() < 1e-15);
        }
    }

    fn sets4() -> Vec<SetSample> {
        vec![
            SetSample { members: vec![0, 1, 2, 3] },
            SetSample { members: vec![4, 5, 6, 7] },
            SetSample { members: vec![0, 2, 4, 6] },
            SetSample { members: vec![1, 3, 5, 7] },
        ]
    }

    #[test]
    fn set_advantage_example() {
        let sets = vec![
            SetSample { members: vec![0, 1, 2, 3] },
            SetSample { members: vec![4, 5, 6, 7] },
            SetSample { members: vec![8, 9, 10, 11] },
            SetSample { members: vec![12, 13, 14, 15] },
        ];
        let a = set_advantages(16, &sets, &[0.4, 0.2, 0.2, 0.2]).unwrap();
        assert!((a[0].unwrap() - 0.15).abs() < 1e-15);
        assert!((a[5].unwrap() + 0.05).abs() < 1e-15);
    }

    #[test]
    fn shared_members_average_their_sets() {
        let a = set_advantages(8, &sets4(), &[0.4, 0.0, 0.2, 0.2]).unwrap();
        // Vine 0 is in sets 0 and 2: ((0.4 − 0.2) + (0.2 − 0.2)) / 2.
        assert!((a[0].unwrap() - 0.1).abs() < 1e-15);
        let equal = set_advantages(8, &sets4(), &[0.3; 4]).unwrap();
        assert!(equal.iter().all(|x| x.unwrap() == 0.0));
    }

    #[test]
    fn membership_weighted_advantages_cancel() {
        let scores = [0.7, 0.1, 0.35, 0.05];
        let base = scores.iter().sum::<f64>() / 4.0;
        let total: f64 = sets4().iter().zip(scores).map(|(s, x)| s.members.len() as f64 * (x - base)).sum();
        assert!(total.abs() < 1e-12);
    }

    #[test]
    fn normalization_is_joint_and_population() {
        let mk = |a: f64, source| AdvantageRecord {
            trajectory: 0,
            step: 0,
            advantage: a,
            source,
            target: 0.0,
            behavior_logprob: 0.0,
        };
        let mut recs = vec![
            mk(1.0, AdvantageSource::Gae),
            mk(2.0, AdvantageSource::Polychromic),
            mk(3.0, AdvantageSource::Gae),
        ];
        let s = normalize_advantages(&mut recs);
        assert_eq!(s.mean, 2.0);
        assert!((s.std - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((recs[0].advantage + 1.5f64.sqrt()).abs() < 1e-12);
        assert!(recs.iter().map(|r| r.advantage).sum::<f64>().abs() < 1e-12);
        assert_eq!(s.gae.count, 2);
        let mut flat = vec![mk(0.5, AdvantageSource::Gae); 3];
        assert!(normalize_advantages(&mut flat).degenerate);
        assert!(flat.iter().all(|r| r.advantage == 0.5));
    }

    #[test]
    fn ucb_examples() {
        assert_eq!(ucb_bonus(0, 0.3), 0.3);
        assert_eq!(ucb_bonus(4, 0.3), 0.15);
        assert_eq!(ucb_bonus(1, 0.3), 0.3);
        assert_eq!(ucb_bonus(9, 0.0), 0.0);
        let mut c = VisitCounts::default();
        let o = Observation(vec![1]);
        c.increment(&o, 2);
        c.increment(&o, 2);
        assert_eq!(c.get(&o, 2), 2);
        assert_eq!(VisitCounts::from_entries(c.entries()), c);
    }

    #[test]
    fn negative_window_is_rejected() {
        let batch = VineBatch {
            rollout_state: crate::env::EnvState::from_bytes(vec![0; 16]).unwrap(),
            seed: 0,
            timestep: 0,
            vines: Vec::new(),
        };
        assert!(polychromic_advantages(&batch, &sets4(), &[0.0; 4], -1, 1.0, 0.95, 0).is_err());
    }
}
