use rand::seq::index::sample;
use rand::Rng;

use crate::error::{Error, Result};

/// Unbiased pass@k from `successes` out of `rollouts`: `1 − C(R−s, k)/C(R, k)`.
pub fn pass_at_k(successes: usize, rollouts: usize, k: usize) -> Result<f64> {
    if successes > rollouts {
        return Err(Error::Invalid(format!("{successes} successes out of {rollouts} rollouts")));
    }
    if k == 0 || k > rollouts {
        return Err(Error::Invalid(format!("k = {k} outside 1..={rollouts}")));
    }
    let failures = rollouts - successes;
    if failures < k {
        return Ok(1.0);
    }
    // C(F, k)/C(R, k) = Π_{i<k} (F − i)/(R − i)
    let ratio: f64 = (0..k).map(|i| (failures - i) as f64 / (rollouts - i) as f64).product();
    Ok(1.0 - ratio)
}

/// Mean number of distinct `Some` items among `k` attempts drawn without
/// replacement, over `resamples` seeded subsamples.
pub fn distinct_at_k<T: Ord + Clone>(items: &[Option<T>], k: usize, resamples: usize, rng: &mut impl Rng) -> Result<f64> {
    if k == 0 || k > items.len() {
        return Err(Error::Invalid(format!("k = {k} outside 1..={}", items.len())));
    }
    if resamples == 0 {
        return Err(Error::Invalid("need at least one resample".into()));
    }
    let mut total = 0usize;
    let mut seen = std::collections::BTreeSet::new();
    for _ in 0..resamples {
        seen.clear();
        for i in sample(rng, items.len(), k) {
            if let Some(t) = &items[i] {
                seen.insert(t.clone());
            }
        }
        total += seen.len();
    }
    Ok(total as f64 / resamples as f64)
}
