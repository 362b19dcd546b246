use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bandit::{entropy_delta_approx, entropy_delta_exact, verify_homogeneous_bound, verify_heterogeneous_bound, Bandit, BanditObjective};
use super::tree::{set_q_value, set_values, verify_perf_diff, TreeMdp, TreeObjective, TreePolicy};
use crate::error::Result;
use crate::rng::child_seed;
use crate::setobj::{action_tuples, diversity, mean_return_objective, validate_polychromic, ValidationMode};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckLine {
    pub label: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub pass: bool,
    pub lines: Vec<CheckLine>,
}

impl CheckReport {
    fn new(name: &str, lines: Vec<CheckLine>) -> Self {
        Self { name: name.to_string(), pass: !lines.is_empty() && lines.iter().all(|l| l.pass), lines }
    }

    /// One line per computed quantity, then a verdict line.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for l in &self.lines {
            s.push_str(&format!(
                "{}  {:<40} value={:+.6e} tol={:.3e} {}\n",
                self.name,
                l.label,
                l.value,
                l.tolerance,
                if l.pass { "ok" } else { "FAIL" }
            ));
        }
        s.push_str(&format!("{}  {}\n", self.name, if self.pass { "PASS" } else { "FAIL" }));
        s
    }
}

fn line(label: String, value: f64, tolerance: f64, pass: bool) -> CheckLine {
    CheckLine { label, value, tolerance, pass }
}

/// Tree instance `i` of the standard random family: at most 16 states,
/// 2–4 actions, `n = 2`, `γ = 0.3`, depth 6.
pub fn random_instance(seed: u64, i: usize) -> Result<(TreeMdp, TreePolicy, TreePolicy)> {
    let mut rng = ChaCha8Rng::seed_from_u64(child_seed(seed, &[i as u64]));
    let actions = rng.gen_range(2..=4);
    let states = rng.gen_range(8..=16);
    let tree = TreeMdp::random_layered(states, actions, 6, 2, 0.3, &mut rng)?;
    let theta = TreePolicy::random(tree.num_states(), actions, 2.0, &mut rng);
    let beta = TreePolicy::random(tree.num_states(), actions, 2.0, &mut rng);
    Ok((tree, theta, beta))
}

/// Set performance-difference identity on `instances` random trees.
pub fn check_perf_diff(seed: u64, instances: usize) -> Result<CheckReport> {
    let lines = (0..instances)
        .into_par_iter()
        .map(|i| {
            let (tree, theta, beta) = random_instance(seed, i)?;
            let r = verify_perf_diff(&tree, &theta, &beta, TreeObjective::Polychromic, tree.depth)?;
            let tol = 1e-9 + if r.absorbed { 0.0 } else { r.tail_bound };
            Ok(line(format!("tree {i}: |lhs - rhs| (lhs {:+.6})", r.lhs), r.abs_diff, tol, r.abs_diff < tol))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CheckReport::new("perf-diff", lines))
}

/// `Q♯(s, a_{1:n}) = f(s, a_{1:n}) + γ Σ_i V♯(s₁^{(i)})` at every non-terminal
/// state and action tuple.
pub fn check_q_decomposition(seed: u64, instances: usize) -> Result<CheckReport> {
    let lines = (0..instances)
        .into_par_iter()
        .map(|i| {
            let (tree, _, beta) = random_instance(seed, i)?;
            let f = TreeObjective::Polychromic;
            let v = set_values(&tree, &beta, f, tree.depth - 1)?;
            let mut worst = 0.0f64;
            for s in (0..tree.num_states()).filter(|&s| !tree.terminal[s]) {
                for (t, _) in action_tuples(&beta.probs[s], tree.set_size) {
                    let q = set_q_value(&tree, &beta, f, s, &t, tree.depth)?;
                    let decomposed =
                        tree.objective(f, s, &t) + tree.gamma * t.iter().map(|&a| v[tree.transitions[s][a]]).sum::<f64>();
                    worst = worst.max((q - decomposed).abs());
                }
            }
            Ok(line(format!("tree {i}: max |Q - (f + γΣV)|"), worst, 1e-12, worst < 1e-12))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CheckReport::new("q-decomposition", lines))
}

/// First-order accuracy of the entropy-change prediction on random bandits.
pub fn check_entropy_dynamics(seed: u64, instances: usize) -> Result<CheckReport> {
    let mut lines = Vec::new();
    let kind = BanditObjective::Polychromic;
    for i in 0..instances {
        let mut rng = ChaCha8Rng::seed_from_u64(child_seed(seed, &[i as u64]));
        let actions = rng.gen_range(2..=6);
        let n = rng.gen_range(2..=3);
        let b = Bandit::random(actions, n, 1.5, &mut rng)?;
        let err = |a: f64| (entropy_delta_exact(&b, kind, a) - entropy_delta_approx(&b, kind, a)).abs();
        for alpha in [1e-2, 5e-3] {
            let (e1, e2) = (err(alpha), err(alpha / 2.0));
            if e1 < 1e-14 || e2 < 1e-14 {
                lines.push(line(format!("bandit {i} (|A|={actions}, n={n}) α={alpha}: error underflow"), e1, 1e-14, true));
                continue;
            }
            let ratio = e1 / e2;
            lines.push(line(
                format!("bandit {i} (|A|={actions}, n={n}) α={alpha}: error ratio"),
                ratio,
                0.5,
                (3.5..=4.5).contains(&ratio),
            ));
        }
        let (ex, ap) = (entropy_delta_exact(&b, kind, 1e-4), entropy_delta_approx(&b, kind, 1e-4));
        let agree = ex.signum() == ap.signum() || (ex.abs() < 1e-15 && ap.abs() < 1e-15);
        lines.push(line(format!("bandit {i} α=1e-4: exact {ex:+.3e} vs approx"), ap, 0.0, agree));
    }
    Ok(CheckReport::new("entropy-dynamics", lines))
}

pub const HOMOGENEOUS_PS: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
pub const HOMOGENEOUS_NS: [usize; 3] = [2, 3, 4];

/// Homogeneous-set bound and negativity region over the standard grid.
pub fn check_homogeneous_scaffold() -> Result<CheckReport> {
    let rows = verify_homogeneous_bound(&HOMOGENEOUS_PS, &HOMOGENEOUS_NS)?;
    let mut lines = Vec::new();
    for r in rows {
        lines.push(line(format!("p={} n={}: Λ vs √(p(1-p)/n)", r.p, r.n), r.lambda, r.bound, r.bound_holds));
        if r.negative_region {
            lines.push(line(format!("p={} n={}: Λ < 0", r.p, r.n), r.lambda, 0.0, r.negativity_holds));
        }
    }
    Ok(CheckReport::new("homogeneous-scaffold", lines))
}

/// Heterogeneous-set lower bound over `{1,2} × {0.1,0.2} × {2,3}`.
pub fn check_heterogeneous_scaffold() -> Result<CheckReport> {
    let mut lines = Vec::new();
    for q in [1, 2] {
        for p in [0.1, 0.2] {
            for n in [2, 3] {
                if q > n {
                    continue;
                }
                let r = verify_heterogeneous_bound(q, p, n)?;
                lines.push(line(format!("q={q} p={p} n={n}: Λ vs qpⁿ(1-p)/n"), r.lambda, r.bound, r.holds));
            }
        }
    }
    Ok(CheckReport::new("heterogeneous-scaffold", lines))
}

/// Factor conditions for mean return × diversity on a 3-action bandit with
/// one rewarding action.
pub fn check_factor_conditions() -> Result<CheckReport> {
    let probs = [0.5, 0.3, 0.2];
    let rewards = [1.0, 0.0, 0.0];
    let n = 2;
    let r = validate_polychromic(
        |t: &[usize]| mean_return_objective::<f64>(&t.iter().map(|&a| rewards[a]).collect::<Vec<_>>()),
        |t: &[usize]| diversity::<f64, usize>(t),
        &probs,
        &rewards,
        n,
        ValidationMode::Enumerate,
    )?;
    let mut lines = vec![line("condition 1: Cov(φ_R, ΣR)".into(), r.reward_cov, 0.0, r.condition1)];
    for &(tau, c) in &r.homogeneity_cov {
        lines.push(line(format!("condition 2: Cov(φ_d, #τ={tau})"), c, 0.0, c < 0.0));
    }
    lines.push(line(
        "condition 3: range gap".into(),
        (r.range_r.0 - r.range_d.0).abs().max((r.range_r.1 - r.range_d.1).abs()),
        1e-9,
        r.condition3,
    ));
    Ok(CheckReport::new("factor-conditions", lines))
}

/// Every theory check with its default instance counts.
pub fn run_all(seed: u64) -> Result<Vec<CheckReport>> {
    Ok(vec![
        check_perf_diff(seed, 20)?,
        check_q_decomposition(seed, 20)?,
        check_entropy_dynamics(seed, 10)?,
        check_homogeneous_scaffold()?,
        check_heterogeneous_scaffold()?,
        check_factor_conditions()?,
    ])
}
