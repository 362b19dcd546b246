use rand::Rng;

use super::body::{Body, Parameterization};
use crate::env::{ActionId, ObsSpec, Observation};
use crate::error::{Error, Result};
use crate::scalar::{entropy_of, softmax, Scalar};

/// Flat gradient aligned with a model's parameter layout.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientVector<S>(pub Vec<S>);

impl<S: Scalar> GradientVector<S> {
    pub fn zeros(len: usize) -> Self {
        Self(vec![S::zero(); len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> S {
        self.0.iter().map(|&g| g * g).sum::<S>().sqrt()
    }

    pub fn dot(&self, other: &Self) -> S {
        self.0.iter().zip(&other.0).map(|(&a, &b)| a * b).sum()
    }

    pub fn scale(&mut self, c: S) {
        self.0.iter_mut().for_each(|g| *g *= c);
    }

    /// `self += alpha · other`.
    pub fn axpy(&mut self, alpha: S, other: &Self) {
        for (a, &b) in self.0.iter_mut().zip(&other.0) {
            *a += alpha * b;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|g| g.is_finite())
    }

    /// Rescale so the L2 norm is at most `max_norm`; returns the pre-clip norm.
    pub fn clip_norm(&mut self, max_norm: S) -> S {
        let n = self.norm();
        if n > max_norm {
            self.scale(max_norm / n);
        }
        n
    }
}

/// Softmax policy `π(a|s) ∝ exp(z_a(s) / T)`.
#[derive(Clone, Debug)]
pub struct PolicyModel<S> {
    pub(crate) body: Body<S>,
    pub temperature: S,
}

impl<S: Scalar> PolicyModel<S> {
    pub fn new(param: Parameterization, spec: &ObsSpec, num_actions: usize, rng: &mut impl Rng) -> Self {
        Self { body: Body::new(param, spec, num_actions, rng), temperature: S::one() }
    }

    pub fn from_body(body: Body<S>, temperature: S) -> Self {
        Self { body, temperature }
    }

    pub fn body(&self) -> &Body<S> {
        &self.body
    }

    pub fn num_actions(&self) -> usize {
        self.body.out_dim()
    }

    pub fn param_count(&self) -> usize {
        self.body.param_count()
    }

    pub fn params(&self) -> &[S] {
        self.body.params()
    }

    pub fn params_mut(&mut self) -> &mut [S] {
        self.body.params_mut()
    }

    pub fn parameterization(&self) -> Parameterization {
        self.body.parameterization()
    }

    /// Reserve parameters for `obs` (tabular only); see [`Body::prepare`].
    pub fn prepare(&mut self, obs: &Observation) -> bool {
        self.body.prepare(obs)
    }

    pub fn logits(&self, obs: &Observation) -> Vec<S> {
        self.body.forward(obs)
    }

    pub fn action_distribution(&self, obs: &Observation) -> Vec<S> {
        let z: Vec<S> = self.logits(obs).into_iter().map(|z| z / self.temperature).collect();
        softmax(&z)
    }

    pub fn log_prob(&self, obs: &Observation, action: ActionId) -> S {
        let z: Vec<S> = self.logits(obs).into_iter().map(|z| z / self.temperature).collect();
        crate::scalar::log_softmax(&z)[action]
    }

    pub fn entropy(&self, obs: &Observation) -> S {
        entropy_of(&self.action_distribution(obs))
    }

    /// Inverse-CDF draw; returns the action and its log-probability.
    pub fn sample_action(&self, obs: &Observation, rng: &mut impl Rng) -> (ActionId, S) {
        let probs = self.action_distribution(obs);
        let action = sample_categorical(&probs, rng);
        (action, probs[action].ln())
    }

    /// Add `weight · ∇ log π(action|obs)` into `grad`.
    pub fn accumulate_logprob_grad(&self, obs: &Observation, action: ActionId, weight: S, grad: &mut [S]) {
        let probs = self.action_distribution(obs);
        let scale = weight / self.temperature;
        let dout: Vec<S> = probs
            .iter()
            .enumerate()
            .map(|(j, &p)| scale * (if j == action { S::one() } else { S::zero() } - p))
            .collect();
        self.body.backward(obs, &dout, grad);
    }

    pub fn logprob_grad(&self, obs: &Observation, action: ActionId) -> GradientVector<S> {
        let mut g = GradientVector::zeros(self.param_count());
        self.accumulate_logprob_grad(obs, action, S::one(), &mut g.0);
        g
    }

    /// Add `weight · ∇ KL(behavior ‖ π(·|obs))` into `grad`.
    pub fn accumulate_kl_grad(&self, obs: &Observation, behavior: &[S], weight: S, grad: &mut [S]) {
        let probs = self.action_distribution(obs);
        let scale = weight / self.temperature;
        let dout: Vec<S> = probs.iter().zip(behavior).map(|(&p, &b)| scale * (p - b)).collect();
        self.body.backward(obs, &dout, grad);
    }

    /// Add `weight · ∇ H(π(·|obs))` into `grad`.
    pub fn accumulate_entropy_grad(&self, obs: &Observation, weight: S, grad: &mut [S]) {
        let probs = self.action_distribution(obs);
        let h = entropy_of(&probs);
        let scale = weight / self.temperature;
        let dout: Vec<S> = probs
            .iter()
            .map(|&p| if p > S::zero() { -scale * p * (p.ln() + h) } else { S::zero() })
            .collect();
        self.body.backward(obs, &dout, grad);
    }

    pub fn check_finite(&self) -> Result<()> {
        if self.params().iter().all(|p| p.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite("policy parameters".into()))
        }
    }
}

pub fn sample_categorical<S: Scalar>(probs: &[S], rng: &mut impl Rng) -> ActionId {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p.to_f64_lossy();
        if u < acc {
            return i;
        }
    }
    // Rounding left `u` above the cumulative total: take the last positive entry.
    probs.iter().rposition(|&p| p > S::zero()).unwrap_or(probs.len() - 1)
}

/// State-value function `V(s)`.
#[derive(Clone, Debug)]
pub struct CriticModel<S> {
    pub(crate) body: Body<S>,
}

impl<S: Scalar> CriticModel<S> {
    /// Starts at exactly zero output everywhere.
    pub fn new(param: Parameterization, spec: &ObsSpec, rng: &mut impl Rng) -> Self {
        Self { body: Body::new(param, spec, 1, rng) }
    }

    pub fn from_body(body: Body<S>) -> Self {
        Self { body }
    }

    pub fn body(&self) -> &Body<S> {
        &self.body
    }

    pub fn param_count(&self) -> usize {
        self.body.param_count()
    }

    pub fn params(&self) -> &[S] {
        self.body.params()
    }

    pub fn params_mut(&mut self) -> &mut [S] {
        self.body.params_mut()
    }

    pub fn prepare(&mut self, obs: &Observation) -> bool {
        self.body.prepare(obs)
    }

    pub fn value(&self, obs: &Observation) -> S {
        self.body.forward(obs)[0]
    }

    /// Add `weight · ∇ V(obs)` into `grad`.
    pub fn accumulate_value_grad(&self, obs: &Observation, weight: S, grad: &mut [S]) {
        self.body.backward(obs, &[weight], grad);
    }
}
