use crate::env::{ActionId, Observation};
use crate::error::{Error, Result};
use crate::policy::{CriticModel, GradientVector, PolicyModel};
use crate::rollout::Trajectory;
use crate::scalar::{categorical_kl, Scalar};

/// One state-action pair ready for a gradient step.
#[derive(Clone, Debug, PartialEq)]
pub struct UpdateSample {
    pub observation: Observation,
    pub action: ActionId,
    pub advantage: f64,
    /// Critic regression target `R̂_t`.
    pub target: f64,
    pub behavior_logprob: f64,
}

#[derive(Clone, Debug)]
pub struct SurrogateTerms<S> {
    pub loss: f64,
    pub grad: GradientVector<S>,
    /// Largest `|r_t − 1|` in the minibatch.
    pub max_ratio_deviation: f64,
    /// Fraction of samples whose clipped branch is active.
    pub clip_fraction: f64,
}

/// Negative clipped surrogate, averaged over `samples`.
pub fn ppo_loss<S: Scalar>(policy: &PolicyModel<S>, samples: &[&UpdateSample], epsilon: f64) -> Result<SurrogateTerms<S>> {
    let mut grad = GradientVector::zeros(policy.param_count());
    if samples.is_empty() {
        return Ok(SurrogateTerms { loss: 0.0, grad, max_ratio_deviation: 0.0, clip_fraction: 0.0 });
    }
    let inv = 1.0 / samples.len() as f64;
    let (mut loss, mut max_dev, mut clipped) = (0.0, 0.0f64, 0usize);
    for (i, s) in samples.iter().enumerate() {
        let logp = policy.log_prob(&s.observation, s.action).to_f64_lossy();
        let ratio = (logp - s.behavior_logprob).exp();
        if !ratio.is_finite() {
            return Err(Error::Divergence {
                step: i,
                what: format!("importance ratio {ratio} for action {} at {:?}", s.action, s.observation.0),
            });
        }
        max_dev = max_dev.max((ratio - 1.0).abs());
        let a = s.advantage;
        let unclipped = ratio * a;
        let clipped_term = ratio.clamp(1.0 - epsilon, 1.0 + epsilon) * a;
        if unclipped <= clipped_term {
            loss -= unclipped * inv;
            // d(r·A)/dθ = A·r·∇log π
            policy.accumulate_logprob_grad(&s.observation, s.action, S::of(-a * ratio * inv), &mut grad.0);
        } else {
            loss -= clipped_term * inv;
            clipped += 1;
        }
    }
    Ok(SurrogateTerms { loss, grad, max_ratio_deviation: max_dev, clip_fraction: clipped as f64 * inv })
}

/// Mean `KL(π_β(·|s) ‖ π_θ(·|s))` over `observations`, with its gradient in θ.
pub fn kl_penalty<'a, S: Scalar>(
    behavior: &PolicyModel<S>,
    policy: &PolicyModel<S>,
    observations: impl IntoIterator<Item = &'a Observation>,
) -> (f64, GradientVector<S>) {
    let mut grad = GradientVector::zeros(policy.param_count());
    let obs: Vec<&Observation> = observations.into_iter().collect();
    if obs.is_empty() {
        return (0.0, grad);
    }
    let w = S::of(1.0 / obs.len() as f64);
    let mut total = S::zero();
    for o in obs {
        let b = behavior.action_distribution(o);
        let p = policy.action_distribution(o);
        total += categorical_kl(&b, &p) * w;
        policy.accumulate_kl_grad(o, &b, w, &mut grad.0);
    }
    (total.to_f64_lossy().max(0.0), grad)
}

/// Mean `(V(s_t) − R̂_t)²` with its gradient.
pub fn value_loss<S: Scalar>(critic: &CriticModel<S>, samples: &[&UpdateSample]) -> (f64, GradientVector<S>) {
    let mut grad = GradientVector::zeros(critic.param_count());
    if samples.is_empty() {
        return (0.0, grad);
    }
    let inv = 1.0 / samples.len() as f64;
    let mut loss = 0.0;
    for s in samples {
        let err = critic.value(&s.observation).to_f64_lossy() - s.target;
        loss += err * err * inv;
        critic.accumulate_value_grad(&s.observation, S::of(2.0 * err * inv), &mut grad.0);
    }
    (loss, grad)
}

/// Ascent direction `(1/|batch|) Σ_τ Σ_t ∇log π(a_t|s_t)(R(τ) − b̄ + bonus_t)`
/// with `b̄` the batch mean return. `bonus` maps `(trajectory, step)` to an
/// exploration bonus.
pub fn reinforce_gradient<S: Scalar>(
    policy: &PolicyModel<S>,
    trajectories: &[Trajectory],
    bonus: impl Fn(usize, usize) -> f64,
) -> Result<GradientVector<S>> {
    if trajectories.len() < 2 {
        return Err(Error::Invalid("REINFORCE with a batch baseline needs at least two trajectories".into()));
    }
    let n = trajectories.len() as f64;
    let baseline = trajectories.iter().map(|t| t.ret).sum::<f64>() / n;
    let mut grad = GradientVector::zeros(policy.param_count());
    for (i, t) in trajectories.iter().enumerate() {
        let centered = t.ret - baseline;
        for (k, s) in t.steps.iter().enumerate() {
            let w = (centered + bonus(i, k)) / n;
            if w != 0.0 {
                policy.accumulate_logprob_grad(&s.observation, s.action, S::of(w), &mut grad.0);
            }
        }
    }
    Ok(grad)
}

/// One plain gradient-ascent step of REINFORCE with a mean-return baseline.
pub fn reinforce_update<S: Scalar>(policy: &mut PolicyModel<S>, trajectories: &[Trajectory], lr: f64) -> Result<()> {
    for t in trajectories {
        for s in &t.steps {
            policy.prepare(&s.observation);
        }
    }
    let grad = reinforce_gradient(policy, trajectories, |_, _| 0.0)?;
    for (p, g) in policy.params_mut().iter_mut().zip(&grad.0) {
        *p += S::of(lr) * *g;
    }
    policy.check_finite()
}
