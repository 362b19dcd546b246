//! Exact-enumeration checks of the set-RL theory: set value functions on
//! small deterministic trees, entropy dynamics and scaffold values on bandits.

mod bandit;
mod checks;
mod tree;

pub use bandit::{
    entropy_delta_approx, entropy_delta_approx_single, entropy_delta_exact, heterogeneous_bandit, homogeneous_bandit,
    scaffold_value, verify_homogeneous_bound, verify_heterogeneous_bound, Bandit, BanditObjective, HeterogeneousReport, HomogeneousRow,
};
pub use checks::{
    check_entropy_dynamics, check_factor_conditions, check_heterogeneous_scaffold, check_homogeneous_scaffold,
    check_perf_diff, check_q_decomposition, random_instance, run_all, CheckLine, CheckReport, HOMOGENEOUS_NS, HOMOGENEOUS_PS,
};
pub use tree::{
    absorbed_within, set_q_value, set_value, set_values, set_visitation, verify_perf_diff, PerfDiffReport, TreeMdp, TreeObjective,
    TreePolicy, TERM_LIMIT,
};
