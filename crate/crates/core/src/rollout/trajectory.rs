use std::collections::BTreeSet;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::env::{ActionId, EnvState, Observation};
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub observation: Observation,
    pub action: ActionId,
    pub reward: f64,
    pub behavior_logprob: f64,
    pub critic_value: f64,
    pub entropy: f64,
    /// Region occupied after the step.
    pub region: Option<u32>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Origin {
    Seed { index: usize },
    Vine { seed: usize, timestep: usize, vine: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<Step>,
    /// Environment reached a terminal state (otherwise truncated by the cap).
    pub terminal: bool,
    pub success: bool,
    /// Discounted return `Σ γ^t r_t`.
    pub ret: f64,
    pub gamma: f64,
    /// Region at the first step, before any action.
    pub start_region: Option<u32>,
    /// Regions visited, including the start region.
    pub signature: BTreeSet<u32>,
    pub origin: Origin,
    /// Critic value of the state after the last step; 0 when terminal.
    pub bootstrap: f64,
    /// Index of the environment configuration used.
    pub config: usize,
    /// Snapshot before each step, kept for seed trajectories only.
    #[serde(skip)]
    pub snapshots: Vec<EnvState>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn recompute_signature(&self) -> BTreeSet<u32> {
        self.start_region
            .into_iter()
            .chain(self.steps.iter().filter_map(|s| s.region))
            .collect()
    }

    pub fn recompute_return(&self) -> f64 {
        let mut g = 0.0;
        for s in self.steps.iter().rev() {
            g = s.reward + self.gamma * g;
        }
        g
    }
}

#[derive(Serialize)]
struct DumpRecord<'a> {
    signature: &'a BTreeSet<u32>,
    #[serde(rename = "return")]
    ret: f64,
    origin: Origin,
    length: usize,
    success: bool,
    config: usize,
}

/// One JSON record per trajectory.
pub fn write_trajectory_dump(mut w: impl Write, trajectories: &[Trajectory]) -> Result<()> {
    for t in trajectories {
        let rec = DumpRecord {
            signature: &t.signature,
            ret: t.ret,
            origin: t.origin,
            length: t.len(),
            success: t.success,
            config: t.config,
        };
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
