//! Function approximators shared by policies and critics.

use std::collections::HashMap;

use rand::Rng;

use crate::env::{ObsSpec, Observation};
use crate::scalar::Scalar;

/// Which function class backs a model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Parameterization {
    /// Logit table keyed by the exact observation; `capacity` rows are reserved.
    Tabular { capacity: usize },
    /// One tanh hidden layer over a one-hot encoding of the observation.
    Mlp { hidden: usize },
}

#[derive(Clone, Debug)]
pub struct Tabular<S> {
    pub(crate) out: usize,
    pub(crate) capacity: usize,
    pub(crate) rows: HashMap<Observation, usize>,
    pub(crate) keys: Vec<Observation>,
    pub(crate) values: Vec<S>,
}

#[derive(Clone, Debug)]
pub struct Mlp<S> {
    pub(crate) spec: ObsSpec,
    pub(crate) input: usize,
    pub(crate) hidden: usize,
    pub(crate) out: usize,
    /// `[w1 (hidden × input) | b1 | w2 (out × hidden) | b2]`.
    pub(crate) values: Vec<S>,
}

/// Map from observations to `out` real outputs with a fixed parameter vector.
#[derive(Clone, Debug)]
pub enum Body<S> {
    Tabular(Tabular<S>),
    Mlp(Mlp<S>),
}

impl<S: Scalar> Body<S> {
    /// Zero-initialized table, or an MLP with small random first-layer
    /// weights and a zero output layer (outputs start at exactly 0).
    pub fn new(param: Parameterization, spec: &ObsSpec, out: usize, rng: &mut impl Rng) -> Self {
        match param {
            Parameterization::Tabular { capacity } => Body::Tabular(Tabular {
                out,
                capacity,
                rows: HashMap::new(),
                keys: Vec::new(),
                values: vec![S::zero(); capacity * out],
            }),
            Parameterization::Mlp { hidden } => {
                let input = spec.one_hot_width();
                let n = hidden * input + hidden + out * hidden + out;
                let mut values = vec![S::zero(); n];
                let scale = 1.0 / (spec.cardinalities.len().max(1) as f64).sqrt();
                for v in &mut values[..hidden * input] {
                    *v = S::of(rng.gen_range(-scale..scale));
                }
                Body::Mlp(Mlp { spec: spec.clone(), input, hidden, out, values })
            }
        }
    }

    pub fn parameterization(&self) -> Parameterization {
        match self {
            Body::Tabular(t) => Parameterization::Tabular { capacity: t.capacity },
            Body::Mlp(m) => Parameterization::Mlp { hidden: m.hidden },
        }
    }

    pub fn out_dim(&self) -> usize {
        match self {
            Body::Tabular(t) => t.out,
            Body::Mlp(m) => m.out,
        }
    }

    pub fn param_count(&self) -> usize {
        self.params().len()
    }

    pub fn params(&self) -> &[S] {
        match self {
            Body::Tabular(t) => &t.values,
            Body::Mlp(m) => &m.values,
        }
    }

    pub fn params_mut(&mut self) -> &mut [S] {
        match self {
            Body::Tabular(t) => &mut t.values,
            Body::Mlp(m) => &mut m.values,
        }
    }

    /// Reserve a table row for `obs`. Returns false once capacity is exhausted.
    /// A no-op for the MLP.
    pub fn prepare(&mut self, obs: &Observation) -> bool {
        match self {
            Body::Tabular(t) => {
                if t.rows.contains_key(obs) {
                    return true;
                }
                if t.keys.len() == t.capacity {
                    return false;
                }
                t.rows.insert(obs.clone(), t.keys.len());
                t.keys.push(obs.clone());
                true
            }
            Body::Mlp(_) => true,
        }
    }

    /// Allocated table rows (0 for the MLP).
    pub fn rows_used(&self) -> usize {
        match self {
            Body::Tabular(t) => t.keys.len(),
            Body::Mlp(_) => 0,
        }
    }

    pub fn forward(&self, obs: &Observation) -> Vec<S> {
        match self {
            Body::Tabular(t) => match t.rows.get(obs) {
                Some(&r) => t.values[r * t.out..(r + 1) * t.out].to_vec(),
                None => vec![S::zero(); t.out],
            },
            Body::Mlp(m) => {
                let (h, _) = m.hidden_layer(obs);
                m.output(&h)
            }
        }
    }

    /// Add `Σ_j dout_j · ∂out_j/∂params` into `grad`.
    pub fn backward(&self, obs: &Observation, dout: &[S], grad: &mut [S]) {
        debug_assert_eq!(grad.len(), self.param_count());
        match self {
            Body::Tabular(t) => {
                if let Some(&r) = t.rows.get(obs) {
                    for (g, &d) in grad[r * t.out..(r + 1) * t.out].iter_mut().zip(dout) {
                        *g += d;
                    }
                }
            }
            Body::Mlp(m) => m.backward(obs, dout, grad),
        }
    }
}

impl<S: Scalar> Mlp<S> {
    fn offsets(&self) -> (usize, usize, usize) {
        let b1 = self.hidden * self.input;
        let w2 = b1 + self.hidden;
        let b2 = w2 + self.out * self.hidden;
        (b1, w2, b2)
    }

    fn hidden_layer(&self, obs: &Observation) -> (Vec<S>, Vec<usize>) {
        let (b1, _, _) = self.offsets();
        let active = self.spec.one_hot_indices(obs);
        let mut h: Vec<S> = self.values[b1..b1 + self.hidden].to_vec();
        for (j, hj) in h.iter_mut().enumerate() {
            let row = &self.values[j * self.input..(j + 1) * self.input];
            for &i in &active {
                *hj += row[i];
            }
            *hj = hj.tanh();
        }
        (h, active)
    }

    fn output(&self, h: &[S]) -> Vec<S> {
        let (_, w2, b2) = self.offsets();
        (0..self.out)
            .map(|k| {
                let row = &self.values[w2 + k * self.hidden..w2 + (k + 1) * self.hidden];
                row.iter().zip(h).map(|(&w, &x)| w * x).sum::<S>() + self.values[b2 + k]
            })
            .collect()
    }

    fn backward(&self, obs: &Observation, dout: &[S], grad: &mut [S]) {
        let (b1, w2, b2) = self.offsets();
        let (h, active) = self.hidden_layer(obs);
        let mut dh = vec![S::zero(); self.hidden];
        for (k, &d) in dout.iter().enumerate() {
            if d == S::zero() {
                continue;
            }
            grad[b2 + k] += d;
            let base = w2 + k * self.hidden;
            for j in 0..self.hidden {
                grad[base + j] += d * h[j];
                dh[j] += d * self.values[base + j];
            }
        }
        for j in 0..self.hidden {
            let dpre = dh[j] * (S::one() - h[j] * h[j]);
            grad[b1 + j] += dpre;
            for &i in &active {
                grad[j * self.input + i] += dpre;
            }
        }
    }
}
