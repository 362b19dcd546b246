use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Fraction of distinct signatures, except 0 when all signatures coincide.
pub fn diversity<S: Scalar, T: Ord>(signatures: &[T]) -> S {
    let n = signatures.len();
    if n == 0 {
        return S::zero();
    }
    let mut refs: Vec<&T> = signatures.iter().collect();
    refs.sort();
    refs.dedup();
    if refs.len() == 1 {
        S::zero()
    } else {
        S::of_usize(refs.len()) / S::of_usize(n)
    }
}

/// Summed in ascending order so any ordering of the set gives the same bits.
pub fn mean_return_objective<S: Scalar>(returns: &[S]) -> S {
    if returns.is_empty() {
        return S::zero();
    }
    let mut sorted = returns.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    sorted.into_iter().sum::<S>() / S::of_usize(returns.len())
}

fn check_normalized<S: Scalar>(returns: &[S]) -> Result<()> {
    match returns.iter().find(|r| !(**r >= S::zero() && **r <= S::one())) {
        Some(r) => Err(Error::Invalid(format!("return {r} outside [0, 1]"))),
        None => Ok(()),
    }
}

/// Mean return times diversity. Returns must lie in `[0, 1]`.
pub fn f_poly<S: Scalar, T: Ord>(returns: &[S], signatures: &[T]) -> Result<S> {
    check_normalized(returns)?;
    Ok(mean_return_objective(returns) * diversity::<S, T>(signatures))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiversityKind {
    /// Distinct visited-region sets (rooms or nodes).
    #[default]
    Signature,
    /// Diversity fixed at 1.
    Constant,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetObjective {
    #[default]
    Polychromic,
    MeanReturn,
}

/// Score of one set under the configured objective.
pub fn score_set<S: Scalar, T: Ord>(
    objective: SetObjective,
    diversity_kind: DiversityKind,
    returns: &[S],
    signatures: &[T],
) -> Result<S> {
    match (objective, diversity_kind) {
        (SetObjective::MeanReturn, _) => Ok(mean_return_objective(returns)),
        (SetObjective::Polychromic, DiversityKind::Signature) => f_poly(returns, signatures),
        (SetObjective::Polychromic, DiversityKind::Constant) => {
            check_normalized(returns)?;
            Ok(mean_return_objective(returns))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diversity_examples() {
        assert_eq!(diversity::<f64, _>(&['A', 'A', 'A', 'A']), 0.0);
        assert_eq!(diversity::<f64, _>(&['A', 'B', 'C', 'D']), 1.0);
        assert_eq!(diversity::<f64, _>(&['A', 'A', 'B', 'C']), 0.75);
        // A singleton set has a single signature, hence zero diversity.
        assert_eq!(diversity::<f64, _>(&['A']), 0.0);
    }

    #[test]
    fn f_poly_examples() {
        let v: f64 = f_poly(&[1.0, 1.0, 0.0, 0.0], &['A', 'A', 'B', 'C']).unwrap();
        assert!((v - 0.375).abs() < 1e-15);
        assert_eq!(f_poly(&[0.0; 4], &['A', 'B', 'C', 'D']).unwrap(), 0.0);
        assert_eq!(f_poly(&[1.0; 4], &['A'; 4]).unwrap(), 0.0);
        assert!(f_poly(&[1.5, 0.0], &['A', 'B']).is_err());
    }

    #[test]
    fn mean_return_examples() {
        assert_eq!(mean_return_objective(&[1.0, 1.0, 0.0, 0.0]), 0.5);
        assert_eq!(mean_return_objective(&[0.0f64; 4]), 0.0);
        assert!((mean_return_objective(&[0.8, 0.0, 0.0, 0.0]) - 0.2f64).abs() < 1e-15);
    }

    #[test]
    fn score_switches() {
        let r = [1.0, 0.5, 0.0, 1.0];
        let s = ['A', 'A', 'B', 'C'];
        assert_eq!(
            score_set(SetObjective::Polychromic, DiversityKind::Signature, &r, &s).unwrap(),
            f_poly(&r, &s).unwrap()
        );
        assert_eq!(
            score_set(SetObjective::Polychromic, DiversityKind::Constant, &r, &['A'; 4]).unwrap(),
            mean_return_objective(&r)
        );
        assert_eq!(
            score_set(SetObjective::MeanReturn, DiversityKind::Signature, &r, &s).unwrap(),
            0.625
        );
    }
}
