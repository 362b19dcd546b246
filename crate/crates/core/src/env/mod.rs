//! Resettable desk-scale environments with exact snapshot/restore.

mod dataset;
mod rooms;
mod snapshot;
mod suite;
mod text;
mod triangle;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub use dataset::{generate_rooms_demos, generate_triangle_data, Dataset, Demo};
pub use rooms::{
    success_reward, Color, Dir, Kind, Mission, ObjectSpec, RoomsConfig, RoomsEnv, Target, Tile,
    ROOMS_ACTIONS,
};
pub use snapshot::EnvState;
pub use suite::{random_graph, two_room_suite, two_room_config};
pub use text::{
    format_graph_configs, format_rooms_configs, parse_graph_configs, parse_rooms_configs,
};
pub use triangle::{
    canonical_triangle, triangle_census, triangle_verify, Triangle, TriangleConfig, TriangleEnv,
};

/// Index into an environment's discrete action set.
pub type ActionId = usize;

/// Discrete feature vector. Doubles as the canonical (injective) state key
/// for tabular policies.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Observation(pub Vec<i32>);

impl Observation {
    pub fn as_slice(&self) -> &[i32] {
        &self.0
    }
}

/// Per-component value ranges: component `i` lies in `0..cardinalities[i]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObsSpec {
    pub cardinalities: Vec<usize>,
}

impl ObsSpec {
    /// Width of the concatenated one-hot encoding.
    pub fn one_hot_width(&self) -> usize {
        self.cardinalities.iter().sum()
    }

    /// Active one-hot indices for `obs`; out-of-range components are clamped.
    pub fn one_hot_indices(&self, obs: &Observation) -> Vec<usize> {
        let mut offset = 0;
        let mut out = Vec::with_capacity(self.cardinalities.len());
        for (value, &card) in obs.0.iter().zip(&self.cardinalities) {
            let v = (*value).clamp(0, card as i32 - 1) as usize;
            out.push(offset + v);
            offset += card;
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub observation: Observation,
    pub reward: f64,
    pub terminal: bool,
    /// Room id (rooms) or node id (triangle) occupied after the step.
    pub region: Option<u32>,
}

/// A single-threaded, exactly restorable environment.
pub trait Environment: Clone + Send + Sync {
    fn num_actions(&self) -> usize;
    fn obs_spec(&self) -> ObsSpec;
    fn observation(&self) -> Observation;
    /// Region currently occupied, used to seed trajectory signatures.
    fn region(&self) -> Option<u32>;
    fn is_terminal(&self) -> bool;
    fn is_success(&self) -> bool;
    fn horizon(&self) -> usize;
    /// Steps taken since the last reset.
    fn elapsed(&self) -> usize;
    fn reset(&mut self);
    /// Reseed the environment RNG, then reset.
    fn reset_with_seed(&mut self, seed: u64);
    fn step(&mut self, action: ActionId) -> Result<StepOutcome>;
    fn snapshot(&self) -> EnvState;
    fn restore(&mut self, state: &EnvState) -> Result<()>;
}
