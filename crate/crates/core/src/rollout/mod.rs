//! Trajectory collection, vine sampling and trajectory-budget accounting.

mod budget;
mod collect;
mod trajectory;

pub use budget::{audited_total, plan_budget, printed_total, BudgetPlan};
pub use collect::{
    collect_seed_rollouts, grow_vine, grow_vines, run_episode, select_rollout_states,
    select_rollout_states_by, RolloutCriterion, VineBatch,
};
pub use trajectory::{write_trajectory_dump, Origin, Step, Trajectory};
