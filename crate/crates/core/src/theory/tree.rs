use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::setobj::action_tuples;

/// Upper limit on enumerated `(state, action tuple, depth)` terms.
pub const TERM_LIMIT: u128 = 10_000_000;

/// Set objective at a tree state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeObjective {
    /// Mean of `r(s, a_i)`.
    MeanReward,
    /// Mean reward times the fraction of distinct actions (0 if all equal).
    Polychromic,
    /// Zero everywhere.
    Zero,
    /// One at every non-terminal state.
    One,
}

/// Deterministic finite MDP explored by sets of `n` independent branches.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeMdp {
    pub num_actions: usize,
    /// `transitions[s][a]` is the successor state.
    pub transitions: Vec<Vec<usize>>,
    /// Per-action reward `r(s, a)` in `[0, 1]`.
    pub rewards: Vec<Vec<f64>>,
    pub terminal: Vec<bool>,
    pub root: usize,
    pub set_size: usize,
    pub gamma: f64,
    /// Depth cap: values sum over `t = 0..=depth`.
    pub depth: usize,
}

/// Per-state action distributions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreePolicy {
    pub probs: Vec<Vec<f64>>,
}

impl TreePolicy {
    pub fn random(states: usize, actions: usize, scale: f64, rng: &mut impl Rng) -> Self {
        let probs = (0..states)
            .map(|_| {
                let z: Vec<f64> = (0..actions).map(|_| rng.gen_range(-scale..scale)).collect();
                crate::scalar::softmax(&z)
            })
            .collect();
        Self { probs }
    }

    pub fn uniform(states: usize, actions: usize) -> Self {
        Self { probs: vec![vec![1.0 / actions as f64; actions]; states] }
    }
}

impl TreeMdp {
    pub fn num_states(&self) -> usize {
        self.transitions.len()
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.num_states();
        if !(self.gamma > 0.0 && self.gamma * self.set_size as f64 <= 1.0 - 1e-12) {
            return Err(Error::Config(format!("need 0 < gamma·n < 1, got gamma={} n={}", self.gamma, self.set_size)));
        }
        if self.root >= s || self.rewards.len() != s || self.terminal.len() != s {
            return Err(Error::Config("inconsistent tree dimensions".into()));
        }
        for st in 0..s {
            if self.transitions[st].len() != self.num_actions || self.rewards[st].len() != self.num_actions {
                return Err(Error::Config(format!("state {st} has the wrong action count")));
            }
            if self.transitions[st].iter().any(|&t| t >= s) {
                return Err(Error::Config(format!("state {st} transitions out of range")));
            }
            if self.terminal[st]
                && (self.transitions[st].iter().any(|&t| t != st) || self.rewards[st].iter().any(|&r| r != 0.0))
            {
                return Err(Error::Config(format!("terminal state {st} must self-loop with zero reward")));
            }
        }
        Ok(())
    }

    /// Random layered DAG: the root alone on layer 0, `depth` layers in all,
    /// then one absorbing terminal. Each action moves to a uniformly chosen
    /// state on the next layer, so every branch is absorbed within `depth` steps.
    pub fn random_layered(
        states: usize,
        actions: usize,
        depth: usize,
        set_size: usize,
        gamma: f64,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if depth == 0 || states < depth + 1 {
            return Err(Error::Config(format!("{states} states cannot fill {depth} layers plus a terminal")));
        }
        let mut sizes = vec![1usize; depth];
        for _ in 0..states - 1 - depth {
            let l = rng.gen_range(1..depth.max(2));
            sizes[l.min(depth - 1)] += 1;
        }
        let mut starts = Vec::with_capacity(depth + 1);
        let mut acc = 0;
        for &sz in &sizes {
            starts.push(acc);
            acc += sz;
        }
        let terminal_id = acc;
        starts.push(terminal_id);
        let n_states = acc + 1;
        let mut transitions = vec![vec![terminal_id; actions]; n_states];
        let mut rewards = vec![vec![0.0; actions]; n_states];
        let mut terminal = vec![false; n_states];
        terminal[terminal_id] = true;
        for l in 0..depth {
            for s in starts[l]..starts[l] + sizes[l] {
                for a in 0..actions {
                    transitions[s][a] = if l + 1 < depth {
                        starts[l + 1] + rng.gen_range(0..sizes[l + 1])
                    } else {
                        terminal_id
                    };
                    rewards[s][a] = rng.gen_range(0.0..1.0);
                }
            }
        }
        let mdp = Self { num_actions: actions, transitions, rewards, terminal, root: 0, set_size, gamma, depth };
        mdp.validate()?;
        Ok(mdp)
    }

    pub fn objective(&self, kind: TreeObjective, s: usize, actions: &[usize]) -> f64 {
        if self.terminal[s] {
            return 0.0;
        }
        let mean = || actions.iter().map(|&a| self.rewards[s][a]).sum::<f64>() / actions.len() as f64;
        match kind {
            TreeObjective::MeanReward => mean(),
            TreeObjective::Polychromic => mean() * crate::setobj::diversity::<f64, usize>(actions),
            TreeObjective::Zero => 0.0,
            TreeObjective::One => 1.0,
        }
    }

    pub fn sup_objective(&self, kind: TreeObjective) -> f64 {
        match kind {
            TreeObjective::Zero => 0.0,
            _ => 1.0,
        }
    }

    fn check_terms(&self, depth: usize) -> Result<()> {
        let terms = (self.num_states() as u128)
            .saturating_mul((self.num_actions as u128).saturating_pow(self.set_size as u32))
            .saturating_mul(depth as u128 + 1);
        if terms > TERM_LIMIT {
            return Err(Error::TermBlowup { terms, limit: TERM_LIMIT });
        }
        Ok(())
    }

    /// `E_{a_{1:n} ∼ π(·|s)}[f(s, a_{1:n})]` for every state.
    pub fn expected_objective(&self, policy: &TreePolicy, kind: TreeObjective) -> Vec<f64> {
        (0..self.num_states())
            .map(|s| {
                action_tuples(&policy.probs[s], self.set_size)
                    .into_iter()
                    .map(|(t, p)| p * self.objective(kind, s, &t))
                    .sum()
            })
            .collect()
    }

    /// `γ^{D+1}n^{D+1}/(1−γn) · sup f`, the most the discarded tail can add.
    pub fn tail_bound(&self, kind: TreeObjective, depth: usize) -> f64 {
        let gn = self.gamma * self.set_size as f64;
        gn.powi(depth as i32 + 1) / (1.0 - gn) * self.sup_objective(kind)
    }

    /// Expected number of branches at each state after `t` steps, `t = 0..=depth`,
    /// starting from the branch counts in `init`.
    fn occupancy(&self, policy: &TreePolicy, init: Vec<f64>, depth: usize) -> Vec<Vec<f64>> {
        let n = self.set_size as f64;
        let mut out = vec![init];
        for _ in 0..depth {
            let prev = out.last().unwrap();
            let mut next = vec![0.0; self.num_states()];
            for (s, &w) in prev.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                for (a, &pa) in policy.probs[s].iter().enumerate() {
                    next[self.transitions[s][a]] += n * w * pa;
                }
            }
            out.push(next);
        }
        out
    }
}

/// Set value `V♯(s)` for every state by backward dynamic programming over
/// `depth + 1` levels: `V_k(s) = E[f] + γn Σ_a π(a|s) V_{k−1}(T(s,a))`.
pub fn set_values(tree: &TreeMdp, policy: &TreePolicy, kind: TreeObjective, depth: usize) -> Result<Vec<f64>> {
    tree.check_terms(depth)?;
    let ef = tree.expected_objective(policy, kind);
    let gn = tree.gamma * tree.set_size as f64;
    let mut v = ef.clone();
    for _ in 0..depth {
        v = (0..tree.num_states())
            .map(|s| {
                let next: f64 = policy.probs[s].iter().enumerate().map(|(a, &p)| p * v[tree.transitions[s][a]]).sum();
                ef[s] + gn * next
            })
            .collect();
    }
    Ok(v)
}

pub fn set_value(tree: &TreeMdp, policy: &TreePolicy, kind: TreeObjective, depth: usize) -> Result<f64> {
    Ok(set_values(tree, policy, kind, depth)?[tree.root])
}

/// Set Q-value at `state` with the first action set fixed, summed forward
/// over the expected branch occupancy of the `n` children.
pub fn set_q_value(
    tree: &TreeMdp,
    policy: &TreePolicy,
    kind: TreeObjective,
    state: usize,
    actions: &[usize],
    depth: usize,
) -> Result<f64> {
    tree.check_terms(depth)?;
    if actions.len() != tree.set_size {
        return Err(Error::Invalid(format!("action set of size {} for n = {}", actions.len(), tree.set_size)));
    }
    let mut q = tree.objective(kind, state, actions);
    if depth == 0 {
        return Ok(q);
    }
    let ef = tree.expected_objective(policy, kind);
    let mut init = vec![0.0; tree.num_states()];
    for &a in actions {
        init[tree.transitions[state][a]] += 1.0;
    }
    let occ = tree.occupancy(policy, init, depth - 1);
    let mut disc = tree.gamma;
    for row in occ {
        q += disc * row.iter().zip(&ef).map(|(o, f)| o * f).sum::<f64>();
        disc *= tree.gamma;
    }
    Ok(q)
}

/// `d♯(s) = (1 − γn) Σ_t γ^t E[#branches at s after t steps]` from the root.
pub fn set_visitation(tree: &TreeMdp, policy: &TreePolicy, depth: usize) -> Vec<f64> {
    let mut init = vec![0.0; tree.num_states()];
    init[tree.root] = 1.0;
    let gn = tree.gamma * tree.set_size as f64;
    let mut d = vec![0.0; tree.num_states()];
    let mut disc = 1.0;
    for row in tree.occupancy(policy, init, depth) {
        for (ds, o) in d.iter_mut().zip(row) {
            *ds += (1.0 - gn) * disc * o;
        }
        disc *= tree.gamma;
    }
    d
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerfDiffReport {
    pub lhs: f64,
    pub rhs: f64,
    pub abs_diff: f64,
    /// Analytic bound on the truncated tail of both values.
    pub tail_bound: f64,
    /// Every branch is terminal after `depth` steps, so nothing was truncated.
    pub absorbed: bool,
}

/// Both sides of the set performance-difference identity:
/// `V♯_θ(s₀) − V♯_β(s₀)` against `1/(1−γn) E_{s∼d♯_θ, a_{1:n}∼π_θ}[A♯_β(s, a_{1:n})]`.
pub fn verify_perf_diff(
    tree: &TreeMdp,
    theta: &TreePolicy,
    beta: &TreePolicy,
    kind: TreeObjective,
    depth: usize,
) -> Result<PerfDiffReport> {
    let v_beta = set_values(tree, beta, kind, depth)?;
    let lhs = set_value(tree, theta, kind, depth)? - v_beta[tree.root];
    let d = set_visitation(tree, theta, depth);
    let gn = tree.gamma * tree.set_size as f64;
    let mut acc = 0.0;
    for (s, &ds) in d.iter().enumerate() {
        if ds == 0.0 || tree.terminal[s] {
            continue;
        }
        let mut adv = 0.0;
        for (tuple, p) in action_tuples(&theta.probs[s], tree.set_size) {
            adv += p * (set_q_value(tree, beta, kind, s, &tuple, depth)? - v_beta[s]);
        }
        acc += ds * adv;
    }
    let rhs = acc / (1.0 - gn);
    let absorbed = [theta, beta].iter().all(|pi| absorbed_within(tree, pi, depth));
    Ok(PerfDiffReport {
        lhs,
        rhs,
        abs_diff: (lhs - rhs).abs(),
        tail_bound: 2.0 * tree.tail_bound(kind, depth),
        absorbed,
    })
}

/// Whether no branch can be at a non-terminal state after `depth + 1` steps.
pub fn absorbed_within(tree: &TreeMdp, policy: &TreePolicy, depth: usize) -> bool {
    let mut init = vec![0.0; tree.num_states()];
    init[tree.root] = 1.0;
    let occ = tree.occupancy(policy, init, depth + 1);
    occ[depth + 1].iter().zip(&tree.terminal).all(|(&o, &t)| t || o == 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tree(seed: u64, n: usize) -> TreeMdp {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        TreeMdp::random_layered(12, 3, 4, n, 0.3, &mut rng).unwrap()
    }

    #[test]
    fn constant_objectives() {
        let t = tree(1, 2);
        let pi = TreePolicy::uniform(t.num_states(), 3);
        assert_eq!(set_value(&t, &pi, TreeObjective::Zero, 4).unwrap(), 0.0);
        // f ≡ 1 on a self-looping non-terminal state: a geometric series in γn
        let looped = TreeMdp {
            num_actions: 2,
            transitions: vec![vec![0, 0]],
            rewards: vec![vec![0.0, 0.0]],
            terminal: vec![false],
            root: 0,
            set_size: 2,
            gamma: 0.3,
            depth: 60,
        };
        let pi = TreePolicy::uniform(1, 2);
        let v = set_value(&looped, &pi, TreeObjective::One, 60).unwrap();
        assert!((v - 2.5).abs() < 1e-12);
        let v20 = set_value(&looped, &pi, TreeObjective::One, 20).unwrap();
        assert!((2.5 - v20) <= looped.tail_bound(TreeObjective::One, 20) + 1e-15);
    }

    #[test]
    fn deterministic_depth_one_hand_expansion() {
        let t = tree(2, 2);
        let mut pi = TreePolicy::uniform(t.num_states(), 3);
        for row in &mut pi.probs {
            *row = vec![0.0, 1.0, 0.0];
        }
        let f = TreeObjective::MeanReward;
        let s1 = t.transitions[0][1];
        let hand = t.rewards[0][1] + t.gamma * 2.0 * t.rewards[s1][1];
        assert!((set_value(&t, &pi, f, 1).unwrap() - hand).abs() < 1e-15);
    }

    #[test]
    fn myopic_q_is_the_objective() {
        let mut t = tree(3, 2);
        t.gamma = 1e-300;
        let pi = TreePolicy::uniform(t.num_states(), 3);
        let q = set_q_value(&t, &pi, TreeObjective::Polychromic, 0, &[0, 2], 5).unwrap();
        assert!((q - t.objective(TreeObjective::Polychromic, 0, &[0, 2])).abs() < 1e-15);
    }

    #[test]
    fn identical_policies_have_no_gap() {
        let t = tree(4, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pi = TreePolicy::random(t.num_states(), 3, 2.0, &mut rng);
        let r = verify_perf_diff(&t, &pi, &pi, TreeObjective::Polychromic, 4).unwrap();
        assert!(r.lhs == 0.0 && r.rhs.abs() < 1e-13);
    }

    #[test]
    fn oversized_instances_are_rejected() {
        let mut t = tree(5, 2);
        t.set_size = 12;
        t.gamma = 0.05;
        let pi = TreePolicy::uniform(t.num_states(), 3);
        assert!(matches!(set_value(&t, &pi, TreeObjective::One, 4), Err(Error::TermBlowup { .. })));
    }

    #[test]
    fn layered_trees_are_absorbed() {
        let t = tree(6, 2);
        assert!(t.num_states() == 12);
        let pi = TreePolicy::uniform(t.num_states(), 3);
        let a = set_value(&t, &pi, TreeObjective::MeanReward, 4).unwrap();
        let b = set_value(&t, &pi, TreeObjective::MeanReward, 9).unwrap();
        assert!((a - b).abs() < 1e-15);
    }
}
