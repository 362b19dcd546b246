use log::warn;
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `n` distinct member indices into a vine batch.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SetSample {
    pub members: Vec<usize>,
}

pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// `m` sets of `n` members drawn without replacement from `0..n_vines`.
/// Sets may share members. When `distinct` is set, repeated sets are
/// redrawn unless `m` exceeds the number of possible sets.
pub fn form_sets(n_vines: usize, n: usize, m: usize, distinct: bool, rng: &mut impl Rng) -> Result<Vec<SetSample>> {
    if n == 0 || n > n_vines {
        return Err(Error::Config(format!("set size {n} must lie in 1..={n_vines}")));
    }
    if m < 2 {
        return Err(Error::Config("need at least two sets for the baseline".into()));
    }
    let possible = binomial(n_vines as u64, n as u64);
    let enforce = distinct && (m as u128) <= possible;
    if distinct && !enforce {
        warn!("{m} sets requested but only {possible} distinct sets of {n} from {n_vines}; allowing repeats");
    }
    let mut sets: Vec<SetSample> = Vec::with_capacity(m);
    while sets.len() < m {
        let mut members = sample(rng, n_vines, n).into_vec();
        members.sort_unstable();
        let s = SetSample { members };
        if enforce && sets.contains(&s) {
            continue;
        }
        sets.push(s);
    }
    Ok(sets)
}
