//! Scalar abstraction shared by every numeric module.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar used by policies, objectives and the theory checks.
///
/// Implemented for `f32` and `f64`; checkpoints always store 64-bit values.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Send
    + Sync
    + 'static
{
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 is representable")
    }

    fn of_usize(x: usize) -> Self {
        Self::from_usize(x).expect("usize is representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Numerically stable softmax of `logits` written into `out`.
pub fn softmax_into<T: Scalar>(logits: &[T], out: &mut Vec<T>) {
    out.clear();
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let mut total = T::zero();
    for &z in logits {
        let e = (z - max).exp();
        total += e;
        out.push(e);
    }
    for p in out.iter_mut() {
        *p /= total;
    }
}

pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let mut out = Vec::with_capacity(logits.len());
    softmax_into(logits, &mut out);
    out
}

/// Log-softmax with the max-shift trick.
pub fn log_softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let lse = logits.iter().map(|&z| (z - max).exp()).sum::<T>().ln() + max;
    logits.iter().map(|&z| z - lse).collect()
}

/// Shannon entropy in nats; zero-probability entries contribute nothing.
pub fn entropy_of<T: Scalar>(probs: &[T]) -> T {
    probs
        .iter()
        .filter(|&&p| p > T::zero())
        .map(|&p| -p * p.ln())
        .sum()
}

/// Categorical KL(p || q), with 0 log 0 = 0.
pub fn categorical_kl<T: Scalar>(p: &[T], q: &[T]) -> T {
    p.iter()
        .zip(q)
        .filter(|(&pi, _)| pi > T::zero())
        .map(|(&pi, &qi)| pi * (pi.ln() - qi.ln()))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_sums_to_one_in_both_precisions() {
        let p64 = softmax(&[0.3f64, -1.0, 2.5, 0.0]);
        assert!((p64.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let p32 = softmax(&[0.3f32, -1.0, 2.5, 0.0]);
        assert!((p32.iter().sum::<f32>() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn log_softmax_matches_log_of_softmax() {
        let z = [1.0f64, 2.0, -3.0];
        let p = softmax(&z);
        for (lp, p) in log_softmax(&z).iter().zip(&p) {
            assert!((lp - p.ln()).abs() < 1e-14);
        }
    }

    #[test]
    fn kl_of_point_mass_against_uniform() {
        let kl = categorical_kl(&[1.0f64, 0.0, 0.0, 0.0], &[0.25; 4]);
        assert!((kl - 4f64.ln()).abs() < 1e-15);
    }
}
