//! Triangle discovery: emit three node tokens forming a triangle of a hidden graph.

use std::collections::BTreeSet;

use super::snapshot::{config_digest, EnvState};
use super::{ActionId, Environment, ObsSpec, Observation, StepOutcome};
use crate::error::{Error, Result};

const SNAPSHOT_KIND: u32 = 0x5452_4931;
pub const MAX_GRAPHS: usize = 16;
pub const MAX_NODES: usize = 64;
pub const SEQUENCE_LENGTH: usize = 3;

/// Sorted node triple; the identity of an unordered triangle.
pub type Triangle = [u32; 3];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TriangleConfig {
    pub graph_id: usize,
    pub num_nodes: usize,
    adjacency: Vec<bool>,
    pub census: Vec<Triangle>,
    pub pretrain_seen: BTreeSet<Triangle>,
    hash: u64,
}

impl TriangleConfig {
    pub fn new(graph_id: usize, num_nodes: usize, edges: &[(u32, u32)]) -> Result<Self> {
        if graph_id >= MAX_GRAPHS {
            return Err(Error::Config(format!("graph id {graph_id} exceeds {}", MAX_GRAPHS - 1)));
        }
        if !(3..=MAX_NODES).contains(&num_nodes) {
            return Err(Error::Config(format!("node count {num_nodes} outside 3..={MAX_NODES}")));
        }
        let mut adjacency = vec![false; num_nodes * num_nodes];
        for &(a, b) in edges {
            let (a, b) = (a as usize, b as usize);
            if a == b {
                return Err(Error::Config(format!("self-loop on node {a}")));
            }
            if a >= num_nodes || b >= num_nodes {
                return Err(Error::Config(format!("edge ({a}, {b}) outside node range")));
            }
            adjacency[a * num_nodes + b] = true;
            adjacency[b * num_nodes + a] = true;
        }
        let census = triangle_census(num_nodes, |a, b| adjacency[a * num_nodes + b]);
        let mut canonical = format!("graph {graph_id} nodes {num_nodes}\n");
        for a in 0..num_nodes {
            for b in a + 1..num_nodes {
                if adjacency[a * num_nodes + b] {
                    canonical.push_str(&format!("{a} {b}\n"));
                }
            }
        }
        let cfg = Self {
            graph_id,
            num_nodes,
            adjacency,
            census,
            pretrain_seen: BTreeSet::new(),
            hash: config_digest(&canonical),
        };
        debug_assert_eq!(cfg.census, brute_force_census(&cfg));
        Ok(cfg)
    }

    pub fn adjacent(&self, a: u32, b: u32) -> bool {
        let n = self.num_nodes;
        (a as usize) < n && (b as usize) < n && self.adjacency[a as usize * n + b as usize]
    }

    /// Undirected edges with `u < v`, in lexicographic order.
    pub fn edges(&self) -> Vec<(u32, u32)> {
        let n = self.num_nodes as u32;
        (0..n)
            .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
            .filter(|&(a, b)| self.adjacent(a, b))
            .collect()
    }

    pub fn neighbours(&self, a: u32) -> Vec<u32> {
        (0..self.num_nodes as u32).filter(|&b| self.adjacent(a, b)).collect()
    }

    pub fn config_hash(&self) -> u64 {
        self.hash
    }
}

/// Triangles of an undirected graph via ordered neighbour intersection.
pub fn triangle_census(num_nodes: usize, adjacent: impl Fn(usize, usize) -> bool) -> Vec<Triangle> {
    let nbrs: Vec<Vec<usize>> = (0..num_nodes)
        .map(|a| (a + 1..num_nodes).filter(|&b| adjacent(a, b)).collect())
        .collect();
    let mut out = Vec::new();
    for a in 0..num_nodes {
        for (i, &b) in nbrs[a].iter().enumerate() {
            for &c in &nbrs[a][i + 1..] {
                if adjacent(b, c) {
                    out.push([a as u32, b as u32, c as u32]);
                }
            }
        }
    }
    out
}

fn brute_force_census(cfg: &TriangleConfig) -> Vec<Triangle> {
    let n = cfg.num_nodes as u32;
    let mut out = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                if cfg.adjacent(a, b) && cfg.adjacent(a, c) && cfg.adjacent(b, c) {
                    out.push([a, b, c]);
                }
            }
        }
    }
    out
}

/// Sorted triple if `tokens` is a valid triangle of `graph`.
pub fn canonical_triangle(graph: &TriangleConfig, tokens: &[i64]) -> Option<Triangle> {
    if tokens.len() != SEQUENCE_LENGTH || tokens.iter().any(|&t| t < 0 || t as usize >= graph.num_nodes) {
        return None;
    }
    let (a, b, c) = (tokens[0] as u32, tokens[1] as u32, tokens[2] as u32);
    if a == b || b == c || a == c {
        return None;
    }
    if !(graph.adjacent(a, b) && graph.adjacent(b, c) && graph.adjacent(a, c)) {
        return None;
    }
    let mut t = [a, b, c];
    t.sort_unstable();
    Some(t)
}

/// Valid iff three distinct, pairwise adjacent, in-range nodes.
pub fn triangle_verify(graph: &TriangleConfig, tokens: &[i64]) -> bool {
    canonical_triangle(graph, tokens).is_some()
}

#[derive(Clone, Debug)]
pub struct TriangleEnv {
    config: TriangleConfig,
    tokens: Vec<u32>,
}

impl TriangleEnv {
    pub fn new(config: TriangleConfig) -> Self {
        Self { config, tokens: Vec::with_capacity(SEQUENCE_LENGTH) }
    }

    pub fn config(&self) -> &TriangleConfig {
        &self.config
    }

    pub fn tokens(&self) -> &[u32] {
        &self.tokens
    }

    /// Observation for graph `graph_id` after emitting `prefix`.
    pub fn observation_for(graph_id: usize, prefix: &[u32]) -> Observation {
        let tok = |i: usize| prefix.get(i).map_or(0, |&t| t as i32 + 1);
        Observation(vec![graph_id as i32, prefix.len() as i32, tok(0), tok(1)])
    }
}

impl Environment for TriangleEnv {
    fn num_actions(&self) -> usize {
        self.config.num_nodes
    }

    fn obs_spec(&self) -> ObsSpec {
        let v = self.config.num_nodes + 1;
        ObsSpec { cardinalities: vec![MAX_GRAPHS, SEQUENCE_LENGTH, v, v] }
    }

    fn observation(&self) -> Observation {
        Self::observation_for(self.config.graph_id, &self.tokens)
    }

    fn region(&self) -> Option<u32> {
        self.tokens.last().copied()
    }

    fn is_terminal(&self) -> bool {
        self.tokens.len() == SEQUENCE_LENGTH
    }

    fn is_success(&self) -> bool {
        let t: Vec<i64> = self.tokens.iter().map(|&t| t as i64).collect();
        triangle_verify(&self.config, &t)
    }

    fn horizon(&self) -> usize {
        SEQUENCE_LENGTH
    }

    fn elapsed(&self) -> usize {
        self.tokens.len()
    }

    fn reset(&mut self) {
        self.tokens.clear();
    }

    fn reset_with_seed(&mut self, _seed: u64) {
        self.reset();
    }

    fn step(&mut self, action: ActionId) -> Result<StepOutcome> {
        if self.is_terminal() {
            return Err(Error::StepAfterTerminal);
        }
        if action >= self.config.num_nodes {
            return Err(Error::Invalid(format!("token {action} outside node range")));
        }
        self.tokens.push(action as u32);
        let terminal = self.is_terminal();
        let reward = if terminal && self.is_success() { 1.0 } else { 0.0 };
        Ok(StepOutcome {
            observation: self.observation(),
            reward,
            terminal,
            region: Some(action as u32),
        })
    }

    fn snapshot(&self) -> EnvState {
        let mut fields = vec![self.tokens.len() as i64];
        fields.extend((0..SEQUENCE_LENGTH).map(|i| self.tokens.get(i).map_or(-1, |&t| t as i64)));
        EnvState::encode(SNAPSHOT_KIND, self.config.hash, &fields)
    }

    fn restore(&mut self, state: &EnvState) -> Result<()> {
        let f = state.decode(SNAPSHOT_KIND, self.config.hash)?;
        if f.len() != 1 + SEQUENCE_LENGTH || f[0] < 0 || f[0] as usize > SEQUENCE_LENGTH {
            return Err(Error::MalformedSnapshot("bad triangle snapshot".into()));
        }
        let len = f[0] as usize;
        if f[1..=len].iter().any(|&t| t < 0 || t as usize >= self.config.num_nodes) {
            return Err(Error::MalformedSnapshot("token out of range".into()));
        }
        self.tokens = f[1..=len].iter().map(|&t| t as u32).collect();
        Ok(())
    }
}
