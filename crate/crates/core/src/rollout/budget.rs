use log::info;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetPlan {
    /// Seed trajectories, and vines grown per rollout state.
    pub vines: usize,
    /// Rollout states per seed trajectory.
    pub states_per_seed: usize,
    pub set_size: usize,
    pub budget: usize,
    /// Trajectories actually collected: `N + p·N²`.
    pub total: usize,
}

/// Audited trajectory count: `N` seeds, `p` rollout states each, `N` vines per state.
pub fn audited_total(n_vines: usize, p: usize) -> usize {
    n_vines + p * n_vines * n_vines
}

/// The closed form `N + N²(p − 1)` as printed alongside the budget.
pub fn printed_total(n_vines: usize, p: usize) -> usize {
    n_vines + n_vines * n_vines * p.saturating_sub(1)
}

pub fn plan_budget(n_vines: usize, p: usize, budget: usize, set_size: usize) -> Result<BudgetPlan> {
    if n_vines <= set_size {
        return Err(Error::Config(format!("need N > n, got N={n_vines}, n={set_size}")));
    }
    if p == 0 {
        return Err(Error::Config("need at least one rollout state per seed".into()));
    }
    if budget < n_vines {
        return Err(Error::Config(format!("budget {budget} below N={n_vines}")));
    }
    let total = audited_total(n_vines, p);
    if total > budget {
        let mut alternatives = Vec::new();
        for n in set_size + 1.. {
            if audited_total(n, 1) > budget {
                break;
            }
            for q in 1.. {
                if audited_total(n, q) > budget {
                    break;
                }
                alternatives.push((n, q));
            }
        }
        return Err(Error::Budget { total, budget, alternatives });
    }
    info!(
        "trajectory budget: N={n_vines} p={p} audited total {total} (printed formula gives {}), B={budget}",
        printed_total(n_vines, p)
    );
    Ok(BudgetPlan { vines: n_vines, states_per_seed: p, set_size, budget, total })
}
