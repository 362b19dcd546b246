//! Numerical check of the three factor conditions on a one-step bandit,
//! where a trajectory is a single action.

use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::sample_categorical;

/// Every `n`-tuple over `probs.len()` actions with its probability, in
/// lexicographic order.
pub fn action_tuples(probs: &[f64], n: usize) -> Vec<(Vec<usize>, f64)> {
    let a = probs.len();
    let total = a.pow(n as u32);
    let mut out = Vec::with_capacity(total);
    let mut tuple = vec![0usize; n];
    for _ in 0..total {
        let p = tuple.iter().map(|&x| probs[x]).product();
        out.push((tuple.clone(), p));
        for slot in tuple.iter_mut().rev() {
            *slot += 1;
            if *slot < a {
                break;
            }
            *slot = 0;
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationMode {
    Enumerate,
    Sample { samples: usize, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    /// `Cov(φ_R, Σ R(τ_i))`; condition 1 needs it positive.
    pub reward_cov: f64,
    pub condition1: bool,
    /// `(τ, Cov(φ_d, Σ 1{τ_i = τ}))` for every τ in the policy's support.
    pub homogeneity_cov: Vec<(usize, f64)>,
    /// `min_τ −Cov(φ_d, Σ 1{τ_i = τ})`; condition 2 needs it positive.
    pub min_neg_homogeneity_cov: f64,
    pub condition2: bool,
    pub range_r: (f64, f64),
    pub range_d: (f64, f64),
    pub condition3: bool,
    pub pass: bool,
}

const RANGE_TOL: f64 = 1e-9;

/// Check `φ = φ_R · φ_d` against the three factor conditions.
///
/// Covariances are under `probs` (exactly, or from `samples` draws); ranges
/// are taken over every tuple in enumerate mode and over observed tuples
/// when sampling.
pub fn validate_polychromic(
    phi_r: impl Fn(&[usize]) -> f64,
    phi_d: impl Fn(&[usize]) -> f64,
    probs: &[f64],
    rewards: &[f64],
    n: usize,
    mode: ValidationMode,
) -> Result<ValidationReport> {
    if probs.len() != rewards.len() {
        return Err(Error::Invalid("probability and reward tables differ in length".into()));
    }
    let weighted: Vec<(Vec<usize>, f64)> = match mode {
        ValidationMode::Enumerate => {
            if probs.len() > 8 || n > 4 {
                return Err(Error::Invalid(format!(
                    "exact enumeration supports at most 8 actions and sets of 4, got {} and {n}",
                    probs.len()
                )));
            }
            action_tuples(probs, n)
        }
        ValidationMode::Sample { samples, seed } => {
            if samples < 1000 {
                return Err(Error::Invalid(format!("{samples} samples cannot certify covariance signs; use at least 1000")));
            }
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let w = 1.0 / samples as f64;
            (0..samples)
                .map(|_| ((0..n).map(|_| sample_categorical(probs, &mut rng)).collect(), w))
                .collect()
        }
    };
    let cov = |x: &dyn Fn(&[usize]) -> f64, y: &dyn Fn(&[usize]) -> f64| -> f64 {
        let (mut ex, mut ey, mut exy) = (0.0, 0.0, 0.0);
        for (t, p) in &weighted {
            let (a, b) = (x(t), y(t));
            ex += p * a;
            ey += p * b;
            exy += p * a * b;
        }
        exy - ex * ey
    };
    let total_reward = |t: &[usize]| t.iter().map(|&a| rewards[a]).sum::<f64>();
    let reward_cov = cov(&phi_r, &total_reward);
    let support: Vec<usize> = (0..probs.len()).filter(|&a| probs[a] > 0.0).collect();
    let homogeneity_cov: Vec<(usize, f64)> = support
        .iter()
        .map(|&tau| {
            let count = move |t: &[usize]| t.iter().filter(|&&a| a == tau).count() as f64;
            (tau, cov(&phi_d, &count))
        })
        .collect();
    let min_neg = homogeneity_cov.iter().map(|&(_, c)| -c).fold(f64::INFINITY, f64::min);
    let range = |f: &dyn Fn(&[usize]) -> f64| {
        weighted.iter().map(|(t, _)| f(t)).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    };
    let range_r = range(&phi_r);
    let range_d = range(&phi_d);
    let condition1 = reward_cov > 0.0;
    let condition2 = min_neg > 0.0;
    let condition3 = (range_r.0 - range_d.0).abs() <= RANGE_TOL && (range_r.1 - range_d.1).abs() <= RANGE_TOL;
    Ok(ValidationReport {
        reward_cov,
        condition1,
        homogeneity_cov,
        min_neg_homogeneity_cov: min_neg,
        condition2,
        range_r,
        range_d,
        condition3,
        pass: condition1 && condition2 && condition3,
    })
}
