use log::debug;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Method, TrainConfig, UcbReset};
use super::loss::{kl_penalty, ppo_loss, reinforce_gradient, value_loss, UpdateSample};
use crate::advantage::{
    gae_records, normalize_advantages, polychromic_advantages, AdvantageRecord, AdvantageSource, NormStats,
    VisitCounts,
};
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::policy::{CriticModel, Optimizer, OptimizerState, PolicyModel};
use crate::rng::{child_seed, substream, tag};
use crate::rollout::{
    collect_seed_rollouts, grow_vines, plan_budget, printed_total, select_rollout_states_by, BudgetPlan, Trajectory,
    VineBatch,
};
use crate::scalar::Scalar;
use crate::setobj::{diversity, form_sets, score_set, SetSample};

/// Version of the per-iteration metrics record.
pub const METRICS_SCHEMA: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    pub schema: u32,
    pub iteration: usize,
    pub method: String,
    /// Over start-state trajectories only.
    pub mean_return: f64,
    pub success_rate: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub kl: f64,
    /// Mean behavior-policy entropy over the batch's steps.
    pub entropy: f64,
    pub advantages: NormStats,
    pub trajectories: usize,
    pub budget: usize,
    /// Mean diversity of the scored sets, for vine-sampled methods.
    pub set_diversity: Option<f64>,
    pub actor_grad_norm: f64,
    pub critic_grad_norm: f64,
    /// Largest `|r − 1|` in the first minibatch of the first epoch.
    pub first_ratio_deviation: f64,
    pub clip_fraction: f64,
    pub minibatches: usize,
}

/// Everything collected in one iteration.
#[derive(Clone, Debug)]
pub struct Batch {
    /// Start-state trajectories.
    pub seeds: Vec<Trajectory>,
    pub vine_batches: Vec<VineBatch>,
    /// Sets and their scores, one entry per vine batch.
    pub sets: Vec<Vec<SetSample>>,
    pub scores: Vec<Vec<f64>>,
}

impl Batch {
    pub fn trajectory_count(&self) -> usize {
        self.seeds.len() + self.vine_batches.iter().map(|b| b.vines.len()).sum::<usize>()
    }

    /// Seeds first, then vines in rollout-state order. Record ids index this.
    pub fn trajectories(&self) -> Vec<&Trajectory> {
        self.seeds.iter().chain(self.vine_batches.iter().flat_map(|b| b.vines.iter())).collect()
    }

    pub fn mean_set_diversity(&self) -> Option<f64> {
        let mut values = Vec::new();
        for (vb, sets) in self.vine_batches.iter().zip(&self.sets) {
            for set in sets {
                let sigs: Vec<_> = set.members.iter().map(|&m| &vb.vines[m].signature).collect();
                values.push(diversity::<f64, _>(&sigs));
            }
        }
        (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Turn advantage records into update samples, looking steps up by id.
pub fn samples_from_records(trajs: &[&Trajectory], records: &[AdvantageRecord]) -> Vec<UpdateSample> {
    records
        .iter()
        .map(|r| {
            let s = &trajs[r.trajectory].steps[r.step];
            UpdateSample {
                observation: s.observation.clone(),
                action: s.action,
                advantage: r.advantage,
                target: r.target,
                behavior_logprob: r.behavior_logprob,
            }
        })
        .collect()
}

/// Mutable optimisation state that a checkpoint must carry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainerState {
    pub iteration: usize,
    pub visit_counts: Vec<(crate::env::Observation, usize, u64)>,
    pub actor_optimizer: OptimizerState,
    pub critic_optimizer: OptimizerState,
}

#[derive(Default)]
struct UpdateStats {
    policy_loss: f64,
    value_loss: f64,
    kl: f64,
    actor_grad_norm: f64,
    critic_grad_norm: f64,
    first_ratio_deviation: f64,
    clip_fraction: f64,
    minibatches: usize,
}

/// Fine-tuning loop over a fixed suite of environment configurations.
pub struct Trainer<S: Scalar, E: Environment> {
    pub config: TrainConfig,
    suite: Vec<E>,
    pub policy: PolicyModel<S>,
    pub critic: CriticModel<S>,
    actor_opt: Optimizer<S>,
    critic_opt: Optimizer<S>,
    pub counts: VisitCounts,
    pub iteration: usize,
    plan: Option<BudgetPlan>,
}

impl<S: Scalar, E: Environment> Trainer<S, E> {
    pub fn new(config: TrainConfig, suite: Vec<E>, mut policy: PolicyModel<S>, critic: CriticModel<S>) -> Result<Self> {
        config.validate()?;
        let first = suite.first().ok_or_else(|| Error::Config("empty environment suite".into()))?;
        if policy.num_actions() != first.num_actions() {
            return Err(Error::Config(format!(
                "policy has {} actions, environment {}",
                policy.num_actions(),
                first.num_actions()
            )));
        }
        let plan = if config.method.uses_vines() {
            Some(plan_budget(config.vines, config.rollout_states, config.budget, config.set_size)?)
        } else {
            if config.budget < 2 {
                return Err(Error::Config("budget must allow at least two trajectories".into()));
            }
            None
        };
        policy.temperature = S::of(config.temperature);
        let clip = Some(S::of(config.max_grad_norm));
        Ok(Self {
            actor_opt: Optimizer::new(config.optimizer, S::of(config.actor_lr), clip),
            critic_opt: Optimizer::new(config.optimizer, S::of(config.critic_lr), clip),
            config,
            suite,
            policy,
            critic,
            counts: VisitCounts::default(),
            iteration: 0,
            plan,
        })
    }

    pub fn suite(&self) -> &[E] {
        &self.suite
    }

    pub fn budget_plan(&self) -> Option<BudgetPlan> {
        self.plan
    }

    /// Start environments for this iteration. Configurations are assigned
    /// round-robin over the run; each start is reseeded from its own stream.
    fn starts(&self, count: usize) -> Vec<(usize, E)> {
        let k = self.suite.len();
        (0..count)
            .map(|i| {
                let c = (self.iteration * count + i) % k;
                let mut env = self.suite[c].clone();
                env.reset_with_seed(child_seed(self.config.seed, &[self.iteration as u64, tag::SEED_ROLLOUT, i as u64]));
                (c, env)
            })
            .collect()
    }

    fn horizon(&self) -> usize {
        self.suite.iter().map(|e| e.horizon()).max().unwrap_or(0)
    }

    /// Collect this iteration's trajectories under the current policy.
    pub fn collect(&self) -> Result<Batch> {
        let cfg = &self.config;
        let path = [self.iteration as u64];
        let critic = (cfg.method != Method::Reinforce).then_some(&self.critic);
        let Some(plan) = self.plan else {
            let seeds = collect_seed_rollouts(
                self.starts(cfg.budget),
                &self.policy,
                critic,
                self.horizon(),
                cfg.gamma,
                false,
                cfg.seed,
                &path,
            )?;
            return Ok(Batch { seeds, vine_batches: vec![], sets: vec![], scores: vec![] });
        };
        let seeds = collect_seed_rollouts(
            self.starts(plan.vines),
            &self.policy,
            critic,
            self.horizon(),
            cfg.gamma,
            true,
            cfg.seed,
            &path,
        )?;
        let mut sites = Vec::new();
        for (i, s) in seeds.iter().enumerate() {
            for t in select_rollout_states_by(s, plan.states_per_seed, cfg.rollout_criterion) {
                sites.push((i, t));
            }
        }
        let vine_batches = sites
            .par_iter()
            .map(|&(i, t)| {
                let proto = &self.suite[seeds[i].config];
                grow_vines(proto, &seeds[i], i, t, &self.policy, critic, plan.vines, proto.horizon(), cfg.seed, &path)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut sets = Vec::with_capacity(vine_batches.len());
        let mut scores = Vec::with_capacity(vine_batches.len());
        for (b, vb) in vine_batches.iter().enumerate() {
            let mut rng = substream(cfg.seed, &[self.iteration as u64, tag::SETS, b as u64]);
            let s = form_sets(vb.vines.len(), cfg.set_size, cfg.num_sets, cfg.distinct_sets, &mut rng)?;
            let sc = s
                .iter()
                .map(|set| {
                    let returns: Vec<f64> = set.members.iter().map(|&m| vb.vines[m].ret).collect();
                    let sigs: Vec<_> = set.members.iter().map(|&m| &vb.vines[m].signature).collect();
                    score_set(cfg.set_objective, cfg.diversity, &returns, &sigs)
                })
                .collect::<Result<Vec<f64>>>()?;
            sets.push(s);
            scores.push(sc);
        }
        let batch = Batch { seeds, vine_batches, sets, scores };
        if batch.trajectory_count() > plan.budget {
            return Err(Error::Budget { total: batch.trajectory_count(), budget: plan.budget, alternatives: vec![] });
        }
        Ok(batch)
    }

    /// Advantage records for `batch`: set advantages on vine windows, GAE
    /// elsewhere, the exploration bonus, then joint normalization. Updates
    /// `counts` with the whole batch before bonuses are read.
    pub fn build_records(&self, batch: &Batch, counts: &mut VisitCounts) -> Result<(Vec<AdvantageRecord>, NormStats)> {
        let cfg = &self.config;
        let mut records = Vec::new();
        for (i, s) in batch.seeds.iter().enumerate() {
            records.extend(gae_records(s, i, cfg.gamma, cfg.gae_lambda));
        }
        let mut next_id = batch.seeds.len();
        for ((vb, sets), scores) in batch.vine_batches.iter().zip(&batch.sets).zip(&batch.scores) {
            records.extend(polychromic_advantages(
                vb,
                sets,
                scores,
                cfg.window as i64,
                cfg.gamma,
                cfg.gae_lambda,
                next_id,
            )?);
            next_id += vb.vines.len();
        }
        let trajs = batch.trajectories();
        if cfg.ucb_lambda > 0.0 {
            self.apply_bonus(&trajs, &mut records, counts);
        }
        let stats = normalize_advantages(&mut records);
        Ok((records, stats))
    }

    fn apply_bonus(&self, trajs: &[&Trajectory], records: &mut [AdvantageRecord], counts: &mut VisitCounts) {
        if self.config.ucb_reset == UcbReset::PerIteration {
            counts.clear();
        }
        for t in trajs {
            counts.record(t);
        }
        for r in records.iter_mut() {
            let s = &trajs[r.trajectory].steps[r.step];
            r.advantage += counts.bonus(&s.observation, s.action, self.config.ucb_lambda);
        }
    }

    /// One full iteration: collect, score, update. The behavior policy is the
    /// policy at the start of the call.
    pub fn step(&mut self) -> Result<IterationReport> {
        let batch = self.collect()?;
        let trajs = batch.trajectories();
        let n_steps: usize = trajs.iter().map(|t| t.len()).sum();
        let entropy = trajs.iter().flat_map(|t| t.steps.iter().map(|s| s.entropy)).sum::<f64>() / n_steps.max(1) as f64;
        let n_seeds = batch.seeds.len().max(1) as f64;
        let mean_return = batch.seeds.iter().map(|t| t.ret).sum::<f64>() / n_seeds;
        let success_rate = batch.seeds.iter().filter(|t| t.success).count() as f64 / n_seeds;

        let mut counts = std::mem::take(&mut self.counts);
        let (stats, advantages) = if self.config.method == Method::Reinforce {
            let r = self.update_reinforce(&batch, &mut counts);
            (r?, NormStats::default())
        } else {
            let (records, norm) = self.build_records(&batch, &mut counts)?;
            let samples = samples_from_records(&trajs, &records);
            (self.update_ppo(&samples)?, norm)
        };
        self.counts = counts;

        let report = IterationReport {
            schema: METRICS_SCHEMA,
            iteration: self.iteration,
            method: self.config.method.name().to_string(),
            mean_return,
            success_rate,
            policy_loss: stats.policy_loss,
            value_loss: stats.value_loss,
            kl: stats.kl,
            entropy,
            advantages,
            trajectories: batch.trajectory_count(),
            budget: self.config.budget,
            set_diversity: batch.mean_set_diversity(),
            actor_grad_norm: stats.actor_grad_norm,
            critic_grad_norm: stats.critic_grad_norm,
            first_ratio_deviation: stats.first_ratio_deviation,
            clip_fraction: stats.clip_fraction,
            minibatches: stats.minibatches,
        };
        debug!(
            "iteration {}: return {:.4} success {:.3} trajectories {} (printed budget formula {})",
            self.iteration,
            mean_return,
            success_rate,
            report.trajectories,
            printed_total(self.config.vines, self.config.rollout_states)
        );
        self.iteration += 1;
        Ok(report)
    }

    fn prepare_rows(&mut self, samples: &[UpdateSample]) {
        for s in samples {
            self.policy.prepare(&s.observation);
            self.critic.prepare(&s.observation);
        }
    }

    fn update_ppo(&mut self, samples: &[UpdateSample]) -> Result<UpdateStats> {
        self.prepare_rows(samples);
        let behavior = self.policy.clone();
        let cfg = self.config.clone();
        let mut rng = substream(cfg.seed, &[self.iteration as u64, tag::MINIBATCH]);
        let mut order: Vec<usize> = (0..samples.len()).collect();
        let mut st = UpdateStats::default();
        let beta = S::of(cfg.kl_coef);
        let cv = S::of(cfg.value_coef);
        for epoch in 0..cfg.ppo_epochs {
            order.shuffle(&mut rng);
            for (mb, chunk) in order.chunks(cfg.minibatch).enumerate() {
                let refs: Vec<&UpdateSample> = chunk.iter().map(|&i| &samples[i]).collect();
                let surrogate = ppo_loss(&self.policy, &refs, cfg.clip_eps)?;
                if epoch == 0 && mb == 0 {
                    st.first_ratio_deviation = surrogate.max_ratio_deviation;
                }
                let mut g = surrogate.grad;
                let mut kl = 0.0;
                if cfg.kl_coef > 0.0 {
                    let (k, kg) = kl_penalty(&behavior, &self.policy, refs.iter().map(|s| &s.observation));
                    g.axpy(beta, &kg);
                    kl = k;
                }
                let (vl, mut vg) = value_loss(&self.critic, &refs);
                vg.scale(cv);
                let step = st.minibatches;
                if !surrogate.loss.is_finite() || !g.is_finite() {
                    return Err(Error::Divergence { step, what: format!("policy loss {}", surrogate.loss) });
                }
                if !vl.is_finite() || !vg.is_finite() {
                    return Err(Error::Divergence { step, what: format!("value loss {vl}") });
                }
                st.actor_grad_norm += self.actor_opt.step(self.policy.params_mut(), &mut g).to_f64_lossy();
                st.critic_grad_norm += self.critic_opt.step(self.critic.params_mut(), &mut vg).to_f64_lossy();
                st.policy_loss += surrogate.loss;
                st.value_loss += vl;
                st.kl += kl;
                st.clip_fraction += surrogate.clip_fraction;
                st.minibatches += 1;
            }
        }
        self.policy.check_finite()?;
        let m = st.minibatches.max(1) as f64;
        for v in [
            &mut st.policy_loss,
            &mut st.value_loss,
            &mut st.kl,
            &mut st.actor_grad_norm,
            &mut st.critic_grad_norm,
            &mut st.clip_fraction,
        ] {
            *v /= m;
        }
        Ok(st)
    }

    fn update_reinforce(&mut self, batch: &Batch, counts: &mut VisitCounts) -> Result<UpdateStats> {
        let trajs = &batch.seeds;
        let lambda = self.config.ucb_lambda;
        if lambda > 0.0 {
            if self.config.ucb_reset == UcbReset::PerIteration {
                counts.clear();
            }
            for t in trajs {
                counts.record(t);
            }
        }
        for t in trajs {
            for s in &t.steps {
                self.policy.prepare(&s.observation);
            }
        }
        let bonus = |i: usize, k: usize| {
            let s = &trajs[i].steps[k];
            if lambda > 0.0 {
                counts.bonus(&s.observation, s.action, lambda)
            } else {
                0.0
            }
        };
        let mut g = reinforce_gradient(&self.policy, trajs, bonus)?;
        g.scale(-S::one());
        if !g.is_finite() {
            return Err(Error::Divergence { step: 0, what: "REINFORCE gradient".into() });
        }
        let norm = self.actor_opt.step(self.policy.params_mut(), &mut g);
        self.policy.check_finite()?;
        Ok(UpdateStats { actor_grad_norm: norm.to_f64_lossy(), minibatches: 1, ..Default::default() })
    }

    pub fn state(&self) -> TrainerState {
        TrainerState {
            iteration: self.iteration,
            visit_counts: self.counts.entries(),
            actor_optimizer: self.actor_opt.state(),
            critic_optimizer: self.critic_opt.state(),
        }
    }

    pub fn load_state(&mut self, state: &TrainerState) {
        self.iteration = state.iteration;
        self.counts = VisitCounts::from_entries(state.visit_counts.clone());
        self.actor_opt.load_state(&state.actor_optimizer);
        self.critic_opt.load_state(&state.critic_optimizer);
    }
}

/// Gradient of the clipped surrogate over all `samples` at the current policy,
/// as an ascent direction. With a fresh batch the ratios are 1.
pub fn surrogate_direction<S: Scalar>(policy: &PolicyModel<S>, samples: &[UpdateSample], epsilon: f64) -> Result<Vec<f64>> {
    let refs: Vec<&UpdateSample> = samples.iter().collect();
    let t = ppo_loss(policy, &refs, epsilon)?;
    Ok(t.grad.0.iter().map(|g| -g.to_f64_lossy()).collect())
}

/// Count of records by advantage source, `(gae, polychromic)`.
pub fn source_counts(records: &[AdvantageRecord]) -> (usize, usize) {
    let poly = records.iter().filter(|r| r.source == AdvantageSource::Polychromic).count();
    (records.len() - poly, poly)
}
