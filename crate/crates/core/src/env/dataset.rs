//! Pretraining demonstrations for behavior cloning.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;

use super::rooms::{RoomsConfig, RoomsEnv, ROOMS_ACTIONS};
use super::triangle::{Triangle, TriangleConfig, TriangleEnv};
use super::{ActionId, Environment, Observation};
use crate::error::{Error, Result};
use crate::rng::{child_seed, substream, tag};

/// One supervised (observation, action) pair.
#[derive(Clone, Debug, PartialEq)]
pub struct Demo {
    pub observation: Observation,
    pub action: ActionId,
    /// Index of the originating config.
    pub source: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub demos: Vec<Demo>,
    pub num_actions: usize,
    pub episodes: usize,
    pub triangle_samples: usize,
    pub edge_samples: usize,
    /// Triangles emitted per graph id.
    pub seen: BTreeMap<usize, BTreeSet<Triangle>>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.demos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.demos.is_empty()
    }

    /// Shuffled split; the second part holds `round(frac · len)` demos.
    pub fn split(&self, frac: f64, rng: &mut impl Rng) -> (Dataset, Dataset) {
        let mut idx: Vec<usize> = (0..self.demos.len()).collect();
        idx.shuffle(rng);
        let held = ((self.demos.len() as f64) * frac).round() as usize;
        let pick = |ids: &[usize]| Dataset {
            demos: ids.iter().map(|&i| self.demos[i].clone()).collect(),
            num_actions: self.num_actions,
            ..Dataset::default()
        };
        let (a, b) = idx.split_at(self.demos.len() - held);
        (pick(a), pick(b))
    }

    /// Record the emitted triangles on the matching graph configs.
    pub fn mark_seen(&self, graphs: &mut [TriangleConfig]) {
        for g in graphs {
            if let Some(s) = self.seen.get(&g.graph_id) {
                g.pretrain_seen.extend(s.iter().copied());
            }
        }
    }
}

/// Planner demonstrations; each recorded label is swapped for a uniform action
/// with probability `noise` while the expert action is the one executed.
pub fn generate_rooms_demos(configs: &[RoomsConfig], count: usize, noise: f64, seed: u64) -> Result<Dataset> {
    if count == 0 {
        return Err(Error::Config("demo count must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&noise) {
        return Err(Error::Config(format!("noise {noise} outside [0, 1]")));
    }
    let mut data = Dataset { num_actions: ROOMS_ACTIONS.len(), ..Dataset::default() };
    for (ci, cfg) in configs.iter().enumerate() {
        for j in 0..count {
            let path = [tag::DATA, ci as u64, j as u64];
            let mut env = RoomsEnv::new(cfg.clone(), child_seed(seed, &path));
            let mut rng = substream(seed, &path);
            let plan = env.plan().ok_or_else(|| {
                Error::PlannerFailure(format!("no plan for `{}` in {}", cfg.mission, cfg.name))
            })?;
            for expert in plan {
                let action = if rng.gen_bool(noise) { rng.gen_range(0..ROOMS_ACTIONS.len()) } else { expert };
                data.demos.push(Demo { observation: env.observation(), action, source: ci });
                env.step(expert)?;
            }
            if !env.is_success() {
                return Err(Error::PlannerFailure(format!("plan for {} did not succeed", cfg.name)));
            }
            data.episodes += 1;
        }
    }
    Ok(data)
}

/// Per graph: with probability 1/3 a census triangle (all three tokens
/// supervised), otherwise an edge (first two tokens supervised).
pub fn generate_triangle_data(graphs: &[TriangleConfig], count: usize, seed: u64) -> Result<Dataset> {
    if count == 0 {
        return Err(Error::Config("sample count must be at least 1".into()));
    }
    let num_actions = graphs.iter().map(|g| g.num_nodes).max().unwrap_or(0);
    let mut data = Dataset { num_actions, ..Dataset::default() };
    for (gi, g) in graphs.iter().enumerate() {
        let edges = g.edges();
        if edges.is_empty() {
            return Err(Error::Config(format!("graph {} has no edges", g.graph_id)));
        }
        let mut rng = substream(seed, &[tag::DATA, gi as u64]);
        let seen = data.seen.entry(g.graph_id).or_default();
        for _ in 0..count {
            let tokens: Vec<u32> = if rng.gen_bool(1.0 / 3.0) && !g.census.is_empty() {
                let t = g.census[rng.gen_range(0..g.census.len())];
                seen.insert(t);
                data.triangle_samples += 1;
                let mut t = t.to_vec();
                t.shuffle(&mut rng);
                t
            } else {
                let (a, b) = edges[rng.gen_range(0..edges.len())];
                data.edge_samples += 1;
                if rng.gen_bool(0.5) { vec![a, b] } else { vec![b, a] }
            };
            for i in 0..tokens.len() {
                data.demos.push(Demo {
                    observation: TriangleEnv::observation_for(g.graph_id, &tokens[..i]),
                    action: tokens[i] as ActionId,
                    source: gi,
                });
            }
            data.episodes += 1;
        }
    }
    Ok(data)
}
