//! Central finite-difference verification of analytic gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::a2c::{a2c_loss_grad, a2c_loss_grad_with, critic_values, LossWeights};
use super::dagger::{batch_loss_grad, collect_trajectory, ExecTrajectory, RolloutMode};
use super::rollout::{episode_seed, rollout_seeded, Controller, Executor, RolloutOptions};
use super::samplers::sample_goal_desc;
use crate::env::{EnvConfig, IntentionEnv};
use crate::error::Result;
use crate::policy::{ExecConfig, ExecPolicy, IntentConfig, IntentionModel};
use crate::world::{generate_collection, FrequencyTable, NodeId, Perception, Task, Token, WorldGenConfig, WorldId, WorldSet};

/// Max over `probes` random coordinates of
/// `|analytic − numeric| / max(1, |analytic| + |numeric|)`.
pub fn grad_check(
    loss: impl Fn(&[f64]) -> f64,
    params: &[f64],
    analytic: &[f64],
    probes: usize,
    eps: f64,
    rng: &mut impl Rng,
) -> f64 {
    assert!(eps > 0.0, "step must be positive");
    let mut x = params.to_vec();
    let mut worst: f64 = 0.0;
    for _ in 0..probes {
        let i = rng.random_range(0..x.len());
        let orig = x[i];
        x[i] = orig + eps;
        let up = loss(&x);
        x[i] = orig - eps;
        let down = loss(&x);
        x[i] = orig;
        let numeric = (up - down) / (2.0 * eps);
        let err = (analytic[i] - numeric).abs() / (analytic[i].abs() + numeric.abs()).max(1.0);
        worst = worst.max(err);
    }
    worst
}

/// Like [`grad_check`] but probing the given coordinates.
pub fn grad_check_at(loss: impl Fn(&[f64]) -> f64, params: &[f64], analytic: &[f64], coords: &[usize], eps: f64) -> f64 {
    let mut x = params.to_vec();
    let mut worst: f64 = 0.0;
    for &i in coords {
        let orig = x[i];
        x[i] = orig + eps;
        let up = loss(&x);
        x[i] = orig - eps;
        let down = loss(&x);
        x[i] = orig;
        let numeric = (up - down) / (2.0 * eps);
        worst = worst.max((analytic[i] - numeric).abs() / (analytic[i].abs() + numeric.abs()).max(1.0));
    }
    worst
}

/// Worst relative errors of the two training losses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradReport {
    pub exec: f64,
    pub a2c: f64,
    pub probes: usize,
}

impl GradReport {
    pub fn max_error(&self) -> f64 {
        self.exec.max(self.a2c)
    }
}

fn probe_coords(g: &[f64], probes: usize, rng: &mut impl Rng) -> Vec<usize> {
    // half uniform, half among coordinates with nonzero gradient
    let touched: Vec<usize> = (0..g.len()).filter(|i| g[*i] != 0.0).collect();
    let mut out: Vec<usize> = (0..probes.div_ceil(2)).map(|_| rng.random_range(0..g.len())).collect();
    if !touched.is_empty() {
        out.extend((0..probes / 2).map(|_| touched[rng.random_range(0..touched.len())]));
    }
    out
}

fn toy_tasks(ws: &WorldSet, n: usize, rng: &mut impl Rng) -> Vec<Task> {
    let mut out = Vec::new();
    while out.len() < n {
        let w = WorldId(rng.random_range(0..ws.worlds().len() as u32));
        let g = ws.world(w);
        let s = NodeId(rng.random_range(0..g.len() as u32));
        let goal = NodeId(rng.random_range(0..g.len() as u32));
        if !(2..=6).contains(&g.distance(s, goal)) {
            continue;
        }
        let target = g.nodes()[goal.idx()].objects.first().map_or(Token::object(0), |o| o.name);
        out.push(Task {
            id: out.len() as u32,
            world: w,
            start: s,
            goal,
            goal_desc: ws.perception().sparse_goal(g, goal, target),
            target_object: target,
            target_room: g.room_of(goal),
        });
    }
    out
}

fn jitter(params: &mut [f64], scale: f64, rng: &mut impl Rng) {
    params.iter_mut().for_each(|x| *x += rng.random_range(-scale..scale));
}

/// Finite-difference check of the full execution cross-entropy loss and the
/// full actor-critic loss on small seeded models and batches.
pub fn verify_gradients(seed: u64, probes: usize) -> Result<GradReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let worlds = generate_collection(2, seed, &WorldGenConfig { nodes: 24, ..WorldGenConfig::default() })?;
    let table = FrequencyTable::from_worlds(&worlds);
    let ws = WorldSet::new(worlds, Perception::new(table, 30))?;
    let tasks = toy_tasks(&ws, 3, &mut rng);

    let mut exec = ExecPolicy::new(ExecConfig { hidden: 10, init_scale: 0.08 }, &mut rng);
    jitter(&mut exec.params.data, 0.2, &mut rng);
    let batch: Vec<ExecTrajectory> = tasks
        .iter()
        .map(|t| {
            let d = sample_goal_desc(t, &ws, &mut rng);
            collect_trajectory(&exec, &ws, t, d, RolloutMode::Sample, true, 8, &mut rng)
        })
        .collect();
    let (_, g) = batch_loss_grad(&exec, &batch);
    let loss = |x: &[f64]| {
        let mut q = exec.clone();
        q.params.data.copy_from_slice(x);
        batch_loss_grad(&q, &batch).0
    };
    let coords = probe_coords(&g, probes, &mut rng);
    let exec_err = grad_check_at(loss, &exec.params.data, &g, &coords, 1e-5);

    let cfg = IntentConfig { belief_dim: 10, actor_hidden: 8, critic_hidden: 8, ..IntentConfig::default() };
    let mut model = IntentionModel::new(cfg, &mut rng);
    jitter(&mut model.params.data, 0.3, &mut rng);
    let env = IntentionEnv::new(&ws, EnvConfig::default())?;
    let rollouts = tasks
        .iter()
        .map(|t| {
            rollout_seeded(
                &env,
                t,
                Controller::Learned { model: &model, sample: true },
                Executor::Learned(&exec),
                RolloutOptions { enforce_sub_budget: true, skyline: false },
                episode_seed(seed, t.id),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let w = LossWeights { actor: 1.0, entropy: 0.01, critic: 1.0 };
    let (_, g, _) = a2c_loss_grad(&model, &rollouts, w)?;
    // the actor's advantage baseline is a constant of the loss
    let frozen = critic_values(&model, &rollouts)?;
    let loss = |x: &[f64]| {
        let mut m = model.clone();
        m.params.data.copy_from_slice(x);
        a2c_loss_grad_with(&m, &rollouts, w, Some(&frozen)).map_or(f64::NAN, |r| r.0)
    };
    let coords = probe_coords(&g, probes, &mut rng);
    let a2c_err = grad_check_at(loss, &model.params.data, &g, &coords, 1e-5);
    Ok(GradReport { exec: exec_err, a2c: a2c_err, probes })
}
