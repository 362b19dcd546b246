use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::passk::{distinct_at_k, pass_at_k};
use super::suite::evaluation_rollouts;
use crate::env::{canonical_triangle, Triangle, TriangleEnv};
use crate::error::Result;
use crate::policy::PolicyModel;
use crate::rng::{substream, tag};
use crate::rollout::Trajectory;
use crate::scalar::Scalar;

pub const DIFF_RESAMPLES: usize = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphCreativity {
    pub graph_id: usize,
    pub attempts: usize,
    pub valid: usize,
    /// Unique valid triangles.
    pub diversity: usize,
    /// Unique valid triangles absent from the pretraining data.
    pub novel: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CreativityReport {
    pub per_graph: Vec<GraphCreativity>,
    /// Fraction of attempts that are valid triangles.
    pub validity: f64,
    /// Mean count of unique valid triangles per graph.
    pub diversity: f64,
    /// Fraction of attempts that are unique, valid and unseen.
    pub creativity: f64,
    pub k_grid: Vec<usize>,
    /// Expected unique valid triangles in `k` attempts, averaged over graphs.
    pub diff_at_k: Vec<f64>,
    pub validity_pass_at_k: Vec<f64>,
    pub creativity_pass_at_k: Vec<f64>,
}

/// The triangle a finished episode emitted, if it is valid.
pub fn emitted_triangle(env: &TriangleEnv, traj: &Trajectory) -> Option<Triangle> {
    let tokens: Vec<i64> = traj.steps.iter().map(|s| s.action as i64).collect();
    canonical_triangle(env.config(), &tokens)
}

/// Score one graph's attempts. Each unique unseen triangle counts once.
pub fn score_attempts(graph_id: usize, outputs: &[Option<Triangle>], seen: &BTreeSet<Triangle>) -> GraphCreativity {
    let unique: BTreeSet<Triangle> = outputs.iter().flatten().copied().collect();
    GraphCreativity {
        graph_id,
        attempts: outputs.len(),
        valid: outputs.iter().filter(|o| o.is_some()).count(),
        diversity: unique.len(),
        novel: unique.iter().filter(|t| !seen.contains(*t)).count(),
    }
}

/// Validity, diversity, creativity and diff@k over `attempts` per graph.
pub fn creativity_metrics<S: Scalar>(
    policy: &PolicyModel<S>,
    graphs: &[TriangleEnv],
    attempts: usize,
    k_grid: &[usize],
    seed: u64,
) -> Result<CreativityReport> {
    let rollouts = evaluation_rollouts(policy, graphs, attempts, seed)?;
    let outputs: Vec<Vec<Option<Triangle>>> = graphs
        .iter()
        .zip(&rollouts)
        .map(|(g, trajs)| trajs.iter().map(|t| emitted_triangle(g, t)).collect())
        .collect();
    creativity_from_outputs(graphs, &outputs, k_grid, seed)
}

pub fn creativity_from_outputs(
    graphs: &[TriangleEnv],
    outputs: &[Vec<Option<Triangle>>],
    k_grid: &[usize],
    seed: u64,
) -> Result<CreativityReport> {
    let g = graphs.len().max(1) as f64;
    let mut per_graph = Vec::new();
    let mut diff = vec![0.0; k_grid.len()];
    let mut vpass = vec![0.0; k_grid.len()];
    let mut cpass = vec![0.0; k_grid.len()];
    for (gi, (env, outs)) in graphs.iter().zip(outputs).enumerate() {
        let seen = &env.config().pretrain_seen;
        let score = score_attempts(env.config().graph_id, outs, seen);
        // an attempt is creative when it is valid and unseen; repeats still pass
        let creative = outs.iter().filter(|o| o.is_some_and(|t| !seen.contains(&t))).count();
        let mut rng = substream(seed, &[tag::EVAL, tag::BASELINE, gi as u64]);
        for (i, &k) in k_grid.iter().enumerate() {
            diff[i] += distinct_at_k(outs, k, DIFF_RESAMPLES, &mut rng)? / g;
            vpass[i] += pass_at_k(score.valid, outs.len(), k)? / g;
            cpass[i] += pass_at_k(creative, outs.len(), k)? / g;
        }
        per_graph.push(score);
    }
    let attempts: usize = per_graph.iter().map(|p| p.attempts).sum::<usize>().max(1);
    let report = CreativityReport {
        validity: per_graph.iter().map(|p| p.valid).sum::<usize>() as f64 / attempts as f64,
        diversity: per_graph.iter().map(|p| p.diversity).sum::<usize>() as f64 / g,
        creativity: per_graph.iter().map(|p| p.novel).sum::<usize>() as f64 / attempts as f64,
        per_graph,
        k_grid: k_grid.to_vec(),
        diff_at_k: diff,
        validity_pass_at_k: vpass,
        creativity_pass_at_k: cpass,
    };
    debug_assert!(report.creativity <= report.validity);
    Ok(report)
}
