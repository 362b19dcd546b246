use serde::{Deserialize, Serialize};

use super::model::GradientVector;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

/// Persistable optimizer moments.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub t: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

/// Gradient-descent optimizer with optional global-norm clipping.
#[derive(Clone, Debug)]
pub struct Optimizer<S> {
    pub kind: OptimizerKind,
    pub lr: S,
    pub max_grad_norm: Option<S>,
    beta1: S,
    beta2: S,
    eps: S,
    t: u64,
    m: Vec<S>,
    v: Vec<S>,
}

impl<S: Scalar> Optimizer<S> {
    pub fn new(kind: OptimizerKind, lr: S, max_grad_norm: Option<S>) -> Self {
        Self {
            kind,
            lr,
            max_grad_norm,
            beta1: S::of(0.9),
            beta2: S::of(0.999),
            eps: S::of(1e-8),
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn sgd(lr: S) -> Self {
        Self::new(OptimizerKind::Sgd, lr, None)
    }

    /// Clip `grad` in place, then take one descent step. Returns the pre-clip norm.
    pub fn step(&mut self, params: &mut [S], grad: &mut GradientVector<S>) -> S {
        let norm = match self.max_grad_norm {
            Some(max) => grad.clip_norm(max),
            None => grad.norm(),
        };
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, &g) in params.iter_mut().zip(&grad.0) {
                    *p -= self.lr * g;
                }
            }
            OptimizerKind::Adam => {
                if self.m.len() != params.len() {
                    self.m = vec![S::zero(); params.len()];
                    self.v = vec![S::zero(); params.len()];
                }
                self.t += 1;
                let t = self.t as i32;
                let c1 = S::one() - self.beta1.powi(t);
                let c2 = S::one() - self.beta2.powi(t);
                for i in 0..params.len() {
                    let g = grad.0[i];
                    self.m[i] = self.beta1 * self.m[i] + (S::one() - self.beta1) * g;
                    self.v[i] = self.beta2 * self.v[i] + (S::one() - self.beta2) * g * g;
                    let mh = self.m[i] / c1;
                    let vh = self.v[i] / c2;
                    params[i] -= self.lr * mh / (vh.sqrt() + self.eps);
                }
            }
        }
        norm
    }

    pub fn state(&self) -> OptimizerState {
        OptimizerState {
            t: self.t,
            m: self.m.iter().map(|x| x.to_f64_lossy()).collect(),
            v: self.v.iter().map(|x| x.to_f64_lossy()).collect(),
        }
    }

    pub fn load_state(&mut self, s: &OptimizerState) {
        self.t = s.t;
        self.m = s.m.iter().map(|&x| S::of(x)).collect();
        self.v = s.v.iter().map(|&x| S::of(x)).collect();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sgd_step_and_clip() {
        let mut opt = Optimizer::new(OptimizerKind::Sgd, 0.1, Some(0.5));
        let mut p = vec![1.0f64, 1.0];
        let mut g = GradientVector(vec![3.0, 4.0]);
        let n = opt.step(&mut p, &mut g);
        assert_eq!(n, 5.0);
        assert!(g.norm() <= 0.5 + 1e-12);
        assert!((p[0] - (1.0 - 0.1 * 0.3)).abs() < 1e-15);
        assert!((p[1] - (1.0 - 0.1 * 0.4)).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_is_lr_times_sign() {
        let mut opt = Optimizer::new(OptimizerKind::Adam, 0.01, None);
        let mut p = vec![0.0f64, 0.0];
        opt.step(&mut p, &mut GradientVector(vec![2.0, -0.5]));
        assert!((p[0] + 0.01).abs() < 1e-9);
        assert!((p[1] - 0.01).abs() < 1e-9);
    }

    #[test]
    fn adam_minimizes_quadratic_and_state_round_trips() {
        let mut opt = Optimizer::new(OptimizerKind::Adam, 0.05, None);
        let mut p = vec![3.0f64];
        for _ in 0..500 {
            let mut g = GradientVector(vec![2.0 * p[0]]);
            opt.step(&mut p, &mut g);
        }
        assert!(p[0].abs() < 0.05);
        let mut other = Optimizer::new(OptimizerKind::Adam, 0.05, None);
        other.load_state(&opt.state());
        let (mut a, mut b) = (p.clone(), p.clone());
        opt.step(&mut a, &mut GradientVector(vec![0.3]));
        other.step(&mut b, &mut GradientVector(vec![0.3]));
        assert_eq!(a, b);
    }
}
