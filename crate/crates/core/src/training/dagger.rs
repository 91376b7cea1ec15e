//! Imitation pre-training of the execution policy against the shortest-path oracle.

use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::samplers::{drop_features, sample_goal_desc};
use crate::error::{Error, Result};
use crate::nn::{all_finite, argmax, clip_grad, Adam};
use crate::policy::{action_features, legal_actions, oracle_exec_action, ExecPolicy};
use crate::world::{Description, ExecAction, FeatureSet, Task, WorldId, WorldSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PretrainConfig {
    pub iterations: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Step limit of one pre-training episode.
    pub horizon: usize,
    /// Epochs over the pre-training tasks rolled out by the expert before
    /// switching to learner rollouts.
    pub expert_epochs: usize,
    /// Afterwards, the chance that a batch trajectory is still an expert
    /// rollout; the rest are learner rollouts with expert labels.
    pub expert_fraction: f64,
    pub eval_every: usize,
    pub val_tasks: usize,
    pub clip_norm: f64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            iterations: 3000,
            batch_size: 32,
            lr: 3e-3,
            horizon: 15,
            expert_epochs: 4,
            expert_fraction: 0.5,
            eval_every: 250,
            val_tasks: 300,
            clip_norm: 5.0,
        }
    }
}

impl PretrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.expert_fraction) {
            return Err(Error::Config("expert fraction must lie in [0, 1]".into()));
        }
        if self.iterations == 0 || self.batch_size == 0 || !(self.lr > 0.0) || self.horizon == 0 || self.eval_every == 0 {
            return Err(Error::Config("pre-training values must be positive".into()));
        }
        Ok(())
    }
}

/// One labeled decision of an execution rollout.
#[derive(Debug, Clone, PartialEq)]
pub struct ExecSample {
    pub desc: Description,
    pub prev: Option<FeatureSet>,
    pub cands: Vec<FeatureSet>,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExecTrajectory {
    pub world: WorldId,
    pub goal_desc: Description,
    pub steps: Vec<ExecSample>,
    pub success: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RolloutMode {
    Expert,
    Sample,
    Argmax,
}

/// Rolls out one pre-training episode and labels every visited state with the oracle action.
pub fn collect_trajectory(
    policy: &ExecPolicy,
    worlds: &WorldSet,
    task: &Task,
    goal_desc: Description,
    mode: RolloutMode,
    drop: bool,
    horizon: usize,
    rng: &mut impl Rng,
) -> ExecTrajectory {
    let g = worlds.world(task.world);
    let mut s = task.start;
    let mut b = policy.initial_belief();
    let mut prev: Option<FeatureSet> = None;
    let mut steps = Vec::new();
    let mut success = false;
    for _ in 0..horizon {
        let dense = worlds.dense_state(task.world, s);
        let desc = if drop { drop_features(dense, rng) } else { dense.clone() };
        let legal = legal_actions(g, s);
        let cands = action_features(g, s, &legal);
        let oracle = oracle_exec_action(g, s, task.goal);
        let label = legal.iter().position(|a| *a == oracle).expect("oracle action is legal");
        let choice = match mode {
            RolloutMode::Expert => label,
            _ => {
                b = policy.belief_update(&b, &desc, prev.as_ref());
                let probs = policy.exec_action_dist(&b, &goal_desc, &cands);
                if mode == RolloutMode::Argmax {
                    argmax(&probs)
                } else {
                    sample_index(&probs, rng)
                }
            }
        };
        steps.push(ExecSample { desc, prev, cands: cands.clone(), label });
        match legal[choice] {
            ExecAction::Done => {
                success = s == task.goal;
                break;
            }
            ExecAction::Move(to) => {
                s = to;
                prev = Some(cands[choice]);
            }
        }
    }
    ExecTrajectory { world: task.world, goal_desc, steps, success }
}

pub fn sample_index(probs: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
}

/// Summed cross-entropy over the trajectory; accumulates `d loss / d params`
/// scaled by `scale` into `grad` when given.
pub fn trajectory_loss(policy: &ExecPolicy, tr: &ExecTrajectory, scale: f64, grad: Option<&mut [f64]>) -> f64 {
    let mut b = policy.initial_belief();
    let mut caches = Vec::with_capacity(tr.steps.len());
    let mut loss = 0.0;
    for st in &tr.steps {
        let (nb, bc) = policy.belief_update_cached(&b, &st.desc, st.prev.as_ref());
        b = nb;
        let dc = policy.dist_cached(&b, &tr.goal_desc, &st.cands);
        loss -= dc.probs[st.label].max(1e-300).ln();
        caches.push((bc, dc, st.label));
    }
    if let Some(g) = grad {
        let h = policy.hidden();
        let mut dh = vec![0.0; h];
        for (bc, dc, label) in caches.iter().rev() {
            let mut dlogits: Vec<f64> = dc.probs.iter().map(|p| p * scale).collect();
            dlogits[*label] -= scale;
            let mut db = dh.clone();
            policy.dist_backward(dc, &dlogits, g, &mut db);
            let mut dprev = vec![0.0; h];
            policy.belief_backward(bc, &db, g, &mut dprev);
            dh = dprev;
        }
    }
    loss
}

/// Mean per-decision loss and its gradient over a batch.
pub fn batch_loss_grad(policy: &ExecPolicy, batch: &[ExecTrajectory]) -> (f64, Vec<f64>) {
    let n: usize = batch.iter().map(|t| t.steps.len()).sum::<usize>().max(1);
    let mut g = policy.params.zeros_like();
    let scale = 1.0 / n as f64;
    let loss: f64 = batch.iter().map(|t| trajectory_loss(policy, t, scale, Some(&mut g))).sum::<f64>() * scale;
    (loss, g)
}

/// Argmax success rate with dense state descriptions and goal descriptions
/// drawn by the pre-training sampler from a fixed seed.
pub fn exec_success(policy: &ExecPolicy, worlds: &WorldSet, tasks: &[Task], horizon: usize, seed: u64) -> f64 {
    if tasks.is_empty() {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ok = tasks
        .iter()
        .filter(|t| {
            let d_g = sample_goal_desc(t, worlds, &mut rng);
            collect_trajectory(policy, worlds, t, d_g, RolloutMode::Argmax, false, horizon, &mut rng).success
        })
        .count();
    ok as f64 / tasks.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainRecord {
    pub iter: usize,
    pub loss: f64,
    pub val_success: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct PretrainResult {
    pub policy: ExecPolicy,
    pub best_val_success: f64,
    pub log: Vec<PretrainRecord>,
}

pub fn dagger_pretrain(
    worlds: &WorldSet,
    train: &[Task],
    val: &[Task],
    mut policy: ExecPolicy,
    cfg: &PretrainConfig,
    rng: &mut impl Rng,
) -> Result<PretrainResult> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Missing("pre-training tasks".into()));
    }
    let val = &val[..cfg.val_tasks.min(val.len())];
    let expert_iters = cfg.expert_epochs * train.len().div_ceil(cfg.batch_size);
    let mut opt = Adam::new(policy.params.len(), cfg.lr);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut cursor = order.len();
    let mut best = (f64::NEG_INFINITY, policy.clone());
    let mut log = Vec::new();
    for iter in 1..=cfg.iterations {
        let mut batch = Vec::with_capacity(cfg.batch_size);
        for _ in 0..cfg.batch_size {
            if cursor == order.len() {
                use rand::seq::SliceRandom;
                order.shuffle(rng);
                cursor = 0;
            }
            let task = &train[order[cursor]];
            cursor += 1;
            let mode = if iter <= expert_iters || rng.random_bool(cfg.expert_fraction) {
                RolloutMode::Expert
            } else {
                RolloutMode::Sample
            };
            let d_g = sample_goal_desc(task, worlds, rng);
            batch.push(collect_trajectory(&policy, worlds, task, d_g, mode, true, cfg.horizon, rng));
        }
        let (loss, mut g) = batch_loss_grad(&policy, &batch);
        if !loss.is_finite() || !all_finite(&g) {
            return Err(Error::Diverged(format!("pre-training loss {loss} at iteration {iter}")));
        }
        clip_grad(&mut g, cfg.clip_norm);
        opt.step(&mut policy.params.data, &g);
        let mut rec = PretrainRecord { iter, loss, val_success: None };
        if iter % cfg.eval_every == 0 || iter == cfg.iterations {
            let sr = exec_success(&policy, worlds, val, cfg.horizon, 0x5eed);
            info!("pretrain iter {iter} loss {loss:.4} val success {sr:.3}");
            rec.val_success = Some(sr);
            if sr > best.0 {
                best = (sr, policy.clone());
            }
        }
        log.push(rec);
    }
    Ok(PretrainResult { policy: best.1, best_val_success: best.0, log })
}
