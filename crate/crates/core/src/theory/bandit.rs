use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{entropy_of, softmax};
use crate::setobj::{action_tuples, diversity};

/// Single-state, one-step problem with binary rewards and a softmax policy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bandit {
    pub logits: Vec<f64>,
    pub rewards: Vec<f64>,
    pub set_size: usize,
}

/// Set objective on a bandit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BanditObjective {
    /// Mean reward times the fraction of distinct actions (0 if all equal).
    Polychromic,
    MeanReward,
    Constant(f64),
}

pub const MAX_BANDIT_ACTIONS: usize = 8;
pub const MAX_BANDIT_SET: usize = 4;

impl Bandit {
    pub fn new(logits: Vec<f64>, rewards: Vec<f64>, set_size: usize) -> Result<Self> {
        if logits.is_empty() || logits.len() > MAX_BANDIT_ACTIONS || logits.len() != rewards.len() {
            return Err(Error::Config(format!(
                "bandit needs 1..={MAX_BANDIT_ACTIONS} actions with one reward each"
            )));
        }
        if set_size == 0 || set_size > MAX_BANDIT_SET {
            return Err(Error::Config(format!("set size must lie in 1..={MAX_BANDIT_SET}")));
        }
        if rewards.iter().any(|&r| r != 0.0 && r != 1.0) {
            return Err(Error::Config("bandit rewards must be 0 or 1".into()));
        }
        Ok(Self { logits, rewards, set_size })
    }

    /// Bandit whose policy puts exactly `probs` on each action.
    pub fn from_probs(probs: &[f64], rewards: Vec<f64>, set_size: usize) -> Result<Self> {
        if probs.iter().any(|&p| !(p > 0.0)) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::Config("probabilities must be positive and sum to 1".into()));
        }
        Self::new(probs.iter().map(|p| p.ln()).collect(), rewards, set_size)
    }

    /// Random logits in `[-scale, scale]` and random binary rewards with at
    /// least one rewarding action.
    pub fn random(actions: usize, set_size: usize, scale: f64, rng: &mut impl Rng) -> Result<Self> {
        let logits = (0..actions).map(|_| rng.gen_range(-scale..scale)).collect();
        let mut rewards: Vec<f64> = (0..actions).map(|_| if rng.gen_bool(0.5) { 1.0 } else { 0.0 }).collect();
        rewards[rng.gen_range(0..actions)] = 1.0;
        Self::new(logits, rewards, set_size)
    }

    pub fn num_actions(&self) -> usize {
        self.logits.len()
    }

    pub fn probs(&self) -> Vec<f64> {
        softmax(&self.logits)
    }

    pub fn entropy(&self) -> f64 {
        entropy_of(&self.probs())
    }

    pub fn objective(&self, kind: BanditObjective, actions: &[usize]) -> f64 {
        match kind {
            BanditObjective::Constant(c) => c,
            BanditObjective::MeanReward | BanditObjective::Polychromic => {
                let mean = actions.iter().map(|&a| self.rewards[a]).sum::<f64>() / actions.len() as f64;
                if kind == BanditObjective::Polychromic {
                    mean * diversity::<f64, usize>(actions)
                } else {
                    mean
                }
            }
        }
    }

    fn tuples(&self) -> Vec<(Vec<usize>, f64)> {
        action_tuples(&self.probs(), self.set_size)
    }

    /// Exact logit gradient of `E[f]`: `E[f·Σ_i 1{a_i=a}] − nπ(a)E[f]`.
    pub fn logit_gradient(&self, kind: BanditObjective) -> Vec<f64> {
        let probs = self.probs();
        let n = self.set_size as f64;
        let mut ef = 0.0;
        let mut weighted = vec![0.0; self.num_actions()];
        for (t, p) in self.tuples() {
            let f = self.objective(kind, &t);
            ef += p * f;
            for &a in &t {
                weighted[a] += p * f;
            }
        }
        weighted.iter().zip(&probs).map(|(w, pa)| w - n * pa * ef).collect()
    }
}

/// Entropy change after one exact gradient-ascent step of size `alpha` on the logits.
pub fn entropy_delta_exact(bandit: &Bandit, kind: BanditObjective, alpha: f64) -> f64 {
    let g = bandit.logit_gradient(kind);
    let z: Vec<f64> = bandit.logits.iter().zip(&g).map(|(z, g)| z + alpha * g).collect();
    entropy_of(&softmax(&z)) - bandit.entropy()
}

/// First-order prediction
/// `−α Cov_{a_{1:n}}((1/n)Σ_i log π(a_i), Cov_{a'_{1:n}}(f(a'), Σ_{ij} 1{a_i = a'_j}))`,
/// with both covariances by enumeration.
pub fn entropy_delta_approx(bandit: &Bandit, kind: BanditObjective, alpha: f64) -> f64 {
    let probs = bandit.probs();
    let n = bandit.set_size as f64;
    let tuples = bandit.tuples();
    let fs: Vec<f64> = tuples.iter().map(|(t, _)| bandit.objective(kind, t)).collect();
    let ef: f64 = tuples.iter().zip(&fs).map(|((_, p), f)| p * f).sum();
    let inner = |outer: &[usize]| -> f64 {
        let mut e_fx = 0.0;
        let mut e_x = 0.0;
        for ((t, p), f) in tuples.iter().zip(&fs) {
            let x = outer.iter().map(|a| t.iter().filter(|b| *b == a).count()).sum::<usize>() as f64;
            e_fx += p * f * x;
            e_x += p * x;
        }
        e_fx - ef * e_x
    };
    let mut e_lc = 0.0;
    let mut e_l = 0.0;
    let mut e_c = 0.0;
    for (t, p) in &tuples {
        let l = t.iter().map(|&a| probs[a].ln()).sum::<f64>() / n;
        let c = inner(t);
        e_lc += p * l * c;
        e_l += p * l;
        e_c += p * c;
    }
    -alpha * (e_lc - e_l * e_c)
}

/// The same prediction through the single-action form
/// `−α Cov_{a∼π}(log π(a), Cov_{a_{1:n}}(f, Σ_i 1{a_i = a}))`.
pub fn entropy_delta_approx_single(bandit: &Bandit, kind: BanditObjective, alpha: f64) -> f64 {
    let probs = bandit.probs();
    let c = bandit.logit_gradient(kind);
    let e_l: f64 = probs.iter().map(|p| p * p.ln()).sum();
    let e_c: f64 = probs.iter().zip(&c).map(|(p, c)| p * c).sum();
    let e_lc: f64 = probs.iter().zip(&c).map(|(p, c)| p * p.ln() * c).sum();
    -alpha * (e_lc - e_l * e_c)
}

/// Scaffold value `Cov_{a'_{1:n}}(f(a'), (1/I)·#{i : a'_i ∈ a_{1:n}})` with
/// `I = n`, the largest possible overlap of two `n`-element sets. Membership is
/// tested against the distinct elements of `reference`, so a homogeneous
/// reference `{a}` gives `(1/n)Σ_i 1{a'_i = a}`.
pub fn scaffold_value(bandit: &Bandit, kind: BanditObjective, reference: &[usize]) -> Result<f64> {
    if reference.len() != bandit.set_size {
        return Err(Error::Invalid(format!("reference set of size {} for n = {}", reference.len(), bandit.set_size)));
    }
    if reference.iter().any(|&a| a >= bandit.num_actions()) {
        return Err(Error::Invalid("reference action out of range".into()));
    }
    let n = bandit.set_size as f64;
    let (mut e_f, mut e_x, mut e_fx) = (0.0, 0.0, 0.0);
    for (t, p) in bandit.tuples() {
        let f = bandit.objective(kind, &t);
        let x = t.iter().filter(|a| reference.contains(a)).count() as f64 / n;
        e_f += p * f;
        e_x += p * x;
        e_fx += p * f * x;
    }
    Ok(e_fx - e_f * e_x)
}

/// Bandit with one rewarding action of mass `p`; the rest of the mass is
/// spread evenly over `others` zero-reward actions.
pub fn homogeneous_bandit(p: f64, n: usize, others: usize) -> Result<Bandit> {
    if !(p > 0.0 && p < 1.0) || others == 0 {
        return Err(Error::Config(format!("need p in (0, 1) and at least one other action, got p={p}")));
    }
    let mut probs = vec![p];
    probs.extend(std::iter::repeat_n((1.0 - p) / others as f64, others));
    let mut rewards = vec![0.0; others + 1];
    rewards[0] = 1.0;
    Bandit::from_probs(&probs, rewards, n)
}

/// Bandit with `n` distinct actions of mass `p` each, the first `q` rewarding,
/// and `extra` zero-reward actions sharing the remaining `1 − np`.
pub fn heterogeneous_bandit(q: usize, p: f64, n: usize, extra: usize) -> Result<Bandit> {
    if !(p > 0.0 && p * (n as f64) < 1.0) {
        return Err(Error::Config(format!("need 0 < p < 1/n, got p={p} n={n}")));
    }
    if q > n || extra == 0 {
        return Err(Error::Config(format!("need q <= n and at least one extra action, got q={q}")));
    }
    let rest = (1.0 - p * n as f64) / extra as f64;
    let mut probs = vec![p; n];
    probs.extend(std::iter::repeat_n(rest, extra));
    let mut rewards = vec![0.0; n + extra];
    rewards[..q].iter_mut().for_each(|r| *r = 1.0);
    Bandit::from_probs(&probs, rewards, n)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomogeneousRow {
    pub p: f64,
    pub n: usize,
    pub lambda: f64,
    /// `√(p(1−p)/n)`.
    pub bound: f64,
    pub bound_holds: bool,
    /// Whether `p > (n−1)/n`, where the value must be negative.
    pub negative_region: bool,
    pub negativity_holds: bool,
}

/// Scaffold value of the homogeneous rewarding set over a `(p, n)` grid.
pub fn verify_homogeneous_bound(ps: &[f64], ns: &[usize]) -> Result<Vec<HomogeneousRow>> {
    let mut rows = Vec::new();
    for &n in ns {
        for &p in ps {
            let b = homogeneous_bandit(p, n, 3)?;
            let lambda = scaffold_value(&b, BanditObjective::Polychromic, &vec![0; n])?;
            let bound = (p * (1.0 - p) / n as f64).sqrt();
            let negative_region = p > (n as f64 - 1.0) / n as f64;
            rows.push(HomogeneousRow {
                p,
                n,
                lambda,
                bound,
                bound_holds: lambda <= bound,
                negative_region,
                negativity_holds: !negative_region || lambda < 0.0,
            });
        }
    }
    Ok(rows)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeterogeneousReport {
    pub q: usize,
    pub p: f64,
    pub n: usize,
    pub lambda: f64,
    /// `q pⁿ (1−p)/n`.
    pub bound: f64,
    pub holds: bool,
}

/// Scaffold value of the set of `n` distinct actions against the lower bound.
pub fn verify_heterogeneous_bound(q: usize, p: f64, n: usize) -> Result<HeterogeneousReport> {
    let b = heterogeneous_bandit(q, p, n, 2)?;
    let reference: Vec<usize> = (0..n).collect();
    let lambda = scaffold_value(&b, BanditObjective::Polychromic, &reference)?;
    let bound = q as f64 * p.powi(n as i32) * (1.0 - p) / n as f64;
    Ok(HeterogeneousReport { q, p, n, lambda, bound, holds: lambda > bound })
}
