//! Advantage actor-critic for the intention policy, with critic pre-training.

use log::info;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::rollout::{episode_seed, rollout, Controller, Executor, Rollout, RolloutOptions};
use crate::env::IntentionEnv;
use crate::error::{Error, Result};
use crate::nn::{all_finite, clip_grad, Adam};
use crate::policy::IntentionModel;
use crate::world::Task;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct A2CConfig {
    pub iterations: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub entropy_weight: f64,
    pub critic_pretrain_iterations: usize,
    pub clip_norm: f64,
    pub eval_every: usize,
    /// Validation tasks per condition when picking the best checkpoint.
    pub val_tasks: usize,
}

impl Default for A2CConfig {
    fn default() -> Self {
        A2CConfig {
            iterations: 4000,
            batch_size: 32,
            lr: 1e-3,
            entropy_weight: 0.05,
            critic_pretrain_iterations: 100,
            clip_norm: 5.0,
            eval_every: 100,
            val_tasks: 200,
        }
    }
}

impl A2CConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.batch_size == 0 || !(self.lr > 0.0) || self.eval_every == 0 {
            return Err(Error::Config("actor-critic values must be positive".into()));
        }
        if !(self.entropy_weight >= 0.0) {
            return Err(Error::Config("entropy weight must be non-negative".into()));
        }
        Ok(())
    }
}

/// Weights of the three loss terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub actor: f64,
    pub entropy: f64,
    pub critic: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct A2CStats {
    pub loss_actor: f64,
    pub loss_critic: f64,
    pub entropy: f64,
    pub mean_advantage: f64,
    pub mean_return: f64,
}

/// Suffix sums `C_t = Σ_{j ≥ t} c̃_j`.
pub fn cost_to_go(costs: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; costs.len()];
    let mut acc = 0.0;
    for t in (0..costs.len()).rev() {
        acc += costs[t];
        out[t] = acc;
    }
    out
}

/// Loss `Σ_t (C_t − sg V_t) log ψ(ā_t) − β Σ_t H_t + ½ Σ_t (V_t − C_t)²`,
/// averaged over episodes. Descending it moves along `(V − C) ∇ log ψ` for the
/// actor and `(V − C) ∇ V` for the critic. Driver-forced steps contribute only
/// to the critic. Returns the loss, its gradient and statistics.
pub fn a2c_loss_grad(model: &IntentionModel, batch: &[Rollout], w: LossWeights) -> Result<(f64, Vec<f64>, A2CStats)> {
    a2c_loss_grad_with(model, batch, w, None)
}

/// Critic values along each rollout.
pub fn critic_values(model: &IntentionModel, batch: &[Rollout]) -> Result<Vec<Vec<f64>>> {
    batch
        .iter()
        .map(|ro| {
            let mut h = model.initial_hidden();
            ro.steps
                .iter()
                .map(|s| {
                    let (next, c) = model.step(&h, &s.x, &s.mask)?;
                    h = next;
                    Ok(c.value)
                })
                .collect()
        })
        .collect()
}

/// As [`a2c_loss_grad`], optionally with the advantage baseline taken from
/// fixed values instead of the live critic. With a fixed baseline the loss is
/// an ordinary function of the parameters whose exact gradient is the one
/// returned, which is what finite differences can check.
pub fn a2c_loss_grad_with(
    model: &IntentionModel,
    batch: &[Rollout],
    w: LossWeights,
    baseline: Option<&[Vec<f64>]>,
) -> Result<(f64, Vec<f64>, A2CStats)> {
    let mut g = model.params.zeros_like();
    let mut stats = A2CStats::default();
    let scale = 1.0 / batch.len().max(1) as f64;
    let mut n_steps = 0usize;
    let mut total = 0.0;
    for (e, ro) in batch.iter().enumerate() {
        let costs: Vec<f64> = ro.steps.iter().map(|s| s.shaped_cost).collect();
        let returns = cost_to_go(&costs);
        let mut h = model.initial_hidden();
        let mut caches = Vec::with_capacity(ro.steps.len());
        for s in &ro.steps {
            let (next, c) = model.step(&h, &s.x, &s.mask)?;
            h = next;
            caches.push(c);
        }
        let mut dh = model.initial_hidden();
        for (t, (s, c)) in ro.steps.iter().zip(&caches).enumerate().rev() {
            let adv = returns[t] - baseline.map_or(c.value, |b| b[e][t]);
            let mut dlogits = vec![0.0; 5];
            if !s.forced {
                let a = s.action.index();
                let logp = c.probs[a].max(1e-300).ln();
                let ent: f64 = c.probs.iter().filter(|p| **p > 0.0).map(|p| -p * p.ln()).sum();
                total += scale * (w.actor * adv * logp - w.entropy * ent);
                stats.loss_actor += scale * adv * logp;
                stats.entropy += ent;
                for k in 0..5 {
                    if !s.mask[k] {
                        continue;
                    }
                    let p = c.probs[k];
                    let onehot = if k == a { 1.0 } else { 0.0 };
                    let mut d = w.actor * adv * (onehot - p);
                    if p > 0.0 {
                        // d(−H)/dz_k = p_k (ln p_k + H)
                        d += w.entropy * p * (p.ln() + ent);
                    }
                    dlogits[k] = scale * d;
                }
            }
            let dv = scale * w.critic * (c.value - returns[t]);
            total += 0.5 * scale * w.critic * (c.value - returns[t]).powi(2);
            stats.loss_critic += 0.5 * scale * (c.value - returns[t]).powi(2);
            stats.mean_advantage += adv;
            n_steps += 1;
            model.backward(c, &dlogits, dv, &mut g, &mut dh);
        }
        stats.mean_return += scale * returns.first().copied().unwrap_or(0.0);
    }
    if n_steps > 0 {
        stats.mean_advantage /= n_steps as f64;
        stats.entropy /= n_steps as f64;
    }
    Ok((total, g, stats))
}

/// One optimizer step on a batch of rollouts.
pub fn a2c_update(
    model: &mut IntentionModel,
    opt: &mut Adam,
    batch: &[Rollout],
    w: LossWeights,
    clip_norm: f64,
) -> Result<A2CStats> {
    let (loss, mut g, stats) = a2c_loss_grad(model, batch, w)?;
    if !loss.is_finite() || !all_finite(&g) {
        return Err(Error::Diverged(format!("actor-critic loss {loss}")));
    }
    clip_grad(&mut g, clip_norm);
    opt.step(&mut model.params.data, &g);
    Ok(stats)
}

/// One record of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub iter: usize,
    pub loss_actor: f64,
    pub loss_critic: f64,
    pub entropy: f64,
    pub mean_return: f64,
    pub val_success: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub best: IntentionModel,
    pub best_val_success: f64,
    pub last: IntentionModel,
    pub log: Vec<TrainRecord>,
}

pub struct IntentTrainer<'a> {
    pub env: &'a IntentionEnv<'a>,
    pub executor: Executor<'a>,
    pub opts: RolloutOptions,
    pub cfg: &'a A2CConfig,
}

impl IntentTrainer<'_> {
    fn sample_batch(&self, model: &IntentionModel, tasks: &[Task], rng: &mut impl Rng) -> Result<Vec<Rollout>> {
        (0..self.cfg.batch_size)
            .map(|_| {
                let task = &tasks[rng.random_range(0..tasks.len())];
                let seed: u64 = rng.random();
                let controller = Controller::Learned { model, sample: true };
                let mut ep_rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
                rollout(self.env, task, controller, self.executor, self.opts, seed, &mut ep_rng)
            })
            .collect()
    }

    /// Critic regression on returns of the frozen initial actor.
    pub fn pretrain_critic(&self, model: &mut IntentionModel, tasks: &[Task], rng: &mut impl Rng) -> Result<Vec<f64>> {
        let mut opt = Adam::new(model.params.len(), self.cfg.lr);
        let w = LossWeights { actor: 0.0, entropy: 0.0, critic: 1.0 };
        let mut losses = Vec::new();
        for _ in 0..self.cfg.critic_pretrain_iterations {
            let batch = self.sample_batch(model, tasks, rng)?;
            let stats = a2c_update(model, &mut opt, &batch, w, self.cfg.clip_norm)?;
            losses.push(stats.loss_critic);
        }
        Ok(losses)
    }

    /// Argmax success on validation tasks.
    pub fn validate(&self, model: &IntentionModel, val: &[&[Task]]) -> Result<f64> {
        let mut rates = Vec::new();
        for tasks in val {
            let tasks = &tasks[..self.cfg.val_tasks.min(tasks.len())];
            if tasks.is_empty() {
                continue;
            }
            let mut ok = 0;
            for t in tasks {
                let seed = episode_seed(0xa11ce, t.id);
                let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
                let ro = rollout(
                    self.env,
                    t,
                    Controller::Learned { model, sample: false },
                    self.executor,
                    RolloutOptions { enforce_sub_budget: false, ..self.opts },
                    seed,
                    &mut rng,
                )?;
                ok += ro.trace.success as usize;
            }
            rates.push(ok as f64 / tasks.len() as f64);
        }
        Ok(if rates.is_empty() { 0.0 } else { rates.iter().sum::<f64>() / rates.len() as f64 })
    }

    /// Critic pre-training followed by actor-critic updates, keeping the
    /// checkpoint with the best mean validation success.
    pub fn train(
        &self,
        mut model: IntentionModel,
        tasks: &[Task],
        val: &[&[Task]],
        rng: &mut impl Rng,
    ) -> Result<TrainOutput> {
        self.cfg.validate()?;
        if tasks.is_empty() {
            return Err(Error::Missing("training tasks".into()));
        }
        self.pretrain_critic(&mut model, tasks, rng)?;
        let mut opt = Adam::new(model.params.len(), self.cfg.lr);
        let w = LossWeights { actor: 1.0, entropy: self.cfg.entropy_weight, critic: 1.0 };
        let mut best = (self.validate(&model, val)?, model.clone());
        let mut log = Vec::new();
        for iter in 1..=self.cfg.iterations {
            let batch = self.sample_batch(&model, tasks, rng)?;
            let s = a2c_update(&mut model, &mut opt, &batch, w, self.cfg.clip_norm)?;
            let mut rec = TrainRecord {
                iter,
                loss_actor: s.loss_actor,
                loss_critic: s.loss_critic,
                entropy: s.entropy,
                mean_return: s.mean_return,
                val_success: None,
            };
            if iter % self.cfg.eval_every == 0 || iter == self.cfg.iterations {
                let sr = self.validate(&model, val)?;
                info!("a2c iter {iter} return {:.3} entropy {:.3} val {sr:.3}", s.mean_return, s.entropy);
                rec.val_success = Some(sr);
                if sr > best.0 {
                    best = (sr, model.clone());
                }
            }
            log.push(rec);
        }
        Ok(TrainOutput { best: best.1, best_val_success: best.0, last: model, log })
    }
}
