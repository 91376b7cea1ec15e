use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::env::{EnvConfig, IntentAction, IntentionEnv};
use crate::nn::Adam;
use crate::policy::{BaselineKind, ExecConfig, ExecPolicy, IntentConfig, IntentionModel};
use crate::world::{generate_collection, FrequencyTable, NodeId, Perception, Task, Token, WorldGenConfig, WorldId, WorldSet};

fn world_set() -> WorldSet {
    let worlds = generate_collection(3, 31, &WorldGenConfig::default()).unwrap();
    let table = FrequencyTable::from_worlds(&worlds);
    WorldSet::new(worlds, Perception::new(table, 30)).unwrap()
}

fn tasks(ws: &WorldSet, n: usize, len: (usize, usize), seed: u64) -> Vec<Task> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < n {
        let w = WorldId(rng.random_range(0..ws.worlds().len() as u32));
        let g = ws.world(w);
        let s = NodeId(rng.random_range(0..g.len() as u32));
        let goal = NodeId(rng.random_range(0..g.len() as u32));
        let d = g.distance(s, goal);
        if d < len.0 || d > len.1 {
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

fn small_exec(seed: u64) -> ExecPolicy {
    let mut p = ExecPolicy::new(ExecConfig { hidden: 12, init_scale: 0.08 }, &mut ChaCha8Rng::seed_from_u64(seed));
    // move away from the zero-initialized output layer so every path carries gradient
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
    p.params.data.iter_mut().for_each(|x| *x += rng.random_range(-0.2..0.2));
    p
}

fn small_model(belief_dim: usize, seed: u64) -> IntentionModel {
    let cfg = IntentConfig { belief_dim, actor_hidden: 8, critic_hidden: 8, ..Default::default() };
    let mut m = IntentionModel::new(cfg, &mut ChaCha8Rng::seed_from_u64(seed));
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
    m.params.data.iter_mut().for_each(|x| *x += rng.random_range(-0.3..0.3));
    m
}

#[test]
fn exec_loss_gradient_matches_finite_differences() {
    let ws = world_set();
    let p = small_exec(3);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let batch: Vec<ExecTrajectory> = tasks(&ws, 3, (2, 6), 1)
        .iter()
        .map(|t| {
            let d = sample_goal_desc(t, &ws, &mut rng);
            collect_trajectory(&p, &ws, t, d, RolloutMode::Sample, true, 8, &mut rng)
        })
        .collect();
    let (_, g) = batch_loss_grad(&p, &batch);
    let loss = |x: &[f64]| {
        let mut q = p.clone();
        q.params.data.copy_from_slice(x);
        batch_loss_grad(&q, &batch).0
    };
    let err = grad_check(loss, &p.params.data, &g, 64, 1e-5, &mut ChaCha8Rng::seed_from_u64(5));
    assert!(err <= 1e-4, "{err}");
    // probes restricted to touched coordinates are far more informative
    let touched: Vec<usize> = (0..g.len()).filter(|i| g[*i] != 0.0).collect();
    let mut worst: f64 = 0.0;
    for &i in touched.iter().step_by(touched.len() / 64 + 1) {
        let mut x = p.params.data.clone();
        x[i] += 1e-5;
        let up = loss(&x);
        x[i] -= 2e-5;
        let down = loss(&x);
        let num = (up - down) / 2e-5;
        worst = worst.max((g[i] - num).abs() / (g[i].abs() + num.abs()).max(1.0));
    }
    assert!(worst <= 1e-4, "{worst}");
}

fn rollouts(ws: &WorldSet, model: &IntentionModel, exec: &ExecPolicy, n: usize) -> Vec<Rollout> {
    let env = IntentionEnv::new(ws, EnvConfig::default()).unwrap();
    tasks(ws, n, (3, 8), 9)
        .iter()
        .map(|t| {
            rollout_seeded(
                &env,
                t,
                Controller::Learned { model, sample: true },
                Executor::Learned(exec),
                RolloutOptions { enforce_sub_budget: true, skyline: false },
                episode_seed(1, t.id),
            )
            .unwrap()
        })
        .collect()
}

#[test]
fn a2c_gradient_matches_finite_differences() {
    let ws = world_set();
    let exec = small_exec(2);
    let model = small_model(12, 7);
    let batch = rollouts(&ws, &model, &exec, 3);
    let w = LossWeights { actor: 1.0, entropy: 0.01, critic: 1.0 };
    let (_, g, _) = a2c_loss_grad(&model, &batch, w).unwrap();
    let frozen = a2c::critic_values(&model, &batch).unwrap();
    let (_, g2, _) = a2c::a2c_loss_grad_with(&model, &batch, w, Some(&frozen)).unwrap();
    assert_eq!(g, g2);
    let loss = |x: &[f64]| {
        let mut m = model.clone();
        m.params.data.copy_from_slice(x);
        a2c::a2c_loss_grad_with(&m, &batch, w, Some(&frozen)).unwrap().0
    };
    let err = grad_check(loss, &model.params.data, &g, 128, 1e-5, &mut ChaCha8Rng::seed_from_u64(3));
    assert!(err <= 1e-4, "{err}");
}

#[test]
fn single_step_bias_gradient_closed_form() {
    // fresh model: zero output layers give uniform ψ and V = 0
    let cfg = IntentConfig { belief_dim: 4, actor_hidden: 4, critic_hidden: 4, ..Default::default() };
    let model = IntentionModel::new(cfg, &mut ChaCha8Rng::seed_from_u64(0));
    let x = vec![0.1; cfg.input_dim()];
    let mut mask = [true; 5];
    mask[IntentAction::Sub.index()] = false;
    let c = 2.5;
    let ro = Rollout {
        trace: crate::harness::EpisodeTrace {
            task_id: 0,
            seed: 0,
            world: WorldId(0),
            start: NodeId(0),
            goal: NodeId(0),
            steps: vec![],
            final_node: NodeId(0),
            success: false,
            total_raw: c,
            total_shaped: c,
        },
        steps: vec![ActorStep { x, mask, action: IntentAction::Done, forced: false, shaped_cost: c }],
    };
    let beta = 0.1;
    let (_, g, _) = a2c_loss_grad(&model, &[ro], LossWeights { actor: 1.0, entropy: beta, critic: 1.0 }).unwrap();
    let off = model.params.block("actor.b").unwrap().off;
    let ent = 4f64.ln();
    for k in 0..5 {
        let expect = if k == IntentAction::Sub.index() {
            0.0
        } else {
            let p = 0.25;
            let onehot = if k == IntentAction::Done.index() { 1.0 } else { 0.0 };
            c * (onehot - p) + beta * p * (p.ln() + ent)
        };
        assert!((g[off + k] - expect).abs() < 1e-12, "k={k}");
    }
    let cb = model.params.block("critic.b").unwrap().off;
    // ½ (V − C)² with V = 0
    assert!((g[cb] + c).abs() < 1e-12);
}

#[test]
fn zero_advantage_leaves_actor_unchanged() {
    let ws = world_set();
    let exec = small_exec(2);
    let mut model = small_model(12, 8);
    let batch = rollouts(&ws, &model, &exec, 4);
    let before = model.params.data.clone();
    let mut opt = Adam::new(model.params.len(), 1e-2);
    a2c_update(&mut model, &mut opt, &batch, LossWeights { actor: 0.0, entropy: 0.0, critic: 1.0 }, 5.0).unwrap();
    let r = model.actor_range();
    assert_eq!(&model.params.data[r.clone()], &before[r.clone()]);
    assert_ne!(&model.params.data[r.end..], &before[r.end..]);
}

#[test]
fn critic_loss_descends_on_frozen_batch() {
    let ws = world_set();
    let exec = small_exec(2);
    let mut model = small_model(12, 9);
    let batch = rollouts(&ws, &model, &exec, 6);
    let w = LossWeights { actor: 0.0, entropy: 0.0, critic: 1.0 };
    let mut opt = Adam::new(model.params.len(), 3e-3);
    let first = a2c_loss_grad(&model, &batch, w).unwrap().2.loss_critic;
    let mut prev = first;
    for _ in 0..100 {
        a2c_update(&mut model, &mut opt, &batch, w, 5.0).unwrap();
        let now = a2c_loss_grad(&model, &batch, w).unwrap().2.loss_critic;
        assert!(now < prev + 1e-9);
        prev = now;
    }
    assert!(prev < 0.5 * first);
}

#[test]
fn exec_loss_descends_on_frozen_batch() {
    let ws = world_set();
    let mut p = ExecPolicy::new(ExecConfig { hidden: 16, init_scale: 0.08 }, &mut ChaCha8Rng::seed_from_u64(1));
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let batch: Vec<ExecTrajectory> = tasks(&ws, 8, (1, 6), 3)
        .iter()
        .map(|t| {
            let d = sample_goal_desc(t, &ws, &mut rng);
            collect_trajectory(&p, &ws, t, d, RolloutMode::Expert, true, 15, &mut rng)
        })
        .collect();
    for tr in &batch {
        for s in &tr.steps {
            assert!(s.label < s.cands.len());
        }
    }
    let mut opt = Adam::new(p.params.len(), 1e-3);
    let first = batch_loss_grad(&p, &batch).0;
    for _ in 0..50 {
        let (_, g) = batch_loss_grad(&p, &batch);
        opt.step(&mut p.params.data, &g);
    }
    assert!(batch_loss_grad(&p, &batch).0 < first);
}

#[test]
fn rollouts_are_deterministic_and_telescope() {
    let ws = world_set();
    let exec = small_exec(4);
    let model = small_model(12, 5);
    let env = IntentionEnv::new(&ws, EnvConfig::default()).unwrap();
    for t in tasks(&ws, 20, (3, 8), 2) {
        let run = |sample| {
            rollout_seeded(
                &env,
                &t,
                Controller::Learned { model: &model, sample },
                Executor::Learned(&exec),
                RolloutOptions { enforce_sub_budget: true, skyline: false },
                77,
            )
            .unwrap()
        };
        assert_eq!(run(false), run(false));
        let ro = run(true);
        let phi0 = ws.world(t.world).distance(t.start, t.goal) as f64;
        assert!((ro.trace.total_shaped - (ro.trace.total_raw - phi0)).abs() < 1e-9);
        assert_eq!(ro.trace.success, ro.trace.recompute_success());
        for (i, s) in ro.steps.iter().enumerate() {
            if s.forced {
                assert_eq!(s.action, IntentAction::Done);
                assert!(i > 0 && ro.trace.steps[i - 1].stack_depth > 1);
            }
        }
    }
}

#[test]
fn forced_done_fires_when_budget_runs_out() {
    // a controller that pushes a subgoal and then only asks CUR must be forced out
    let ws = world_set();
    let env = IntentionEnv::new(&ws, EnvConfig::default()).unwrap();
    let kind = BaselineKind::BudgetMatched(crate::policy::BudgetX { cur: 20.0, goal: 0.0, sub: 1.0, do_: 0.0 });
    let mut forced_seen = false;
    for t in tasks(&ws, 20, (5, 8), 4) {
        let ro = rollout_seeded(
            &env,
            &t,
            Controller::Baseline(kind),
            Executor::Oracle,
            RolloutOptions { enforce_sub_budget: true, skyline: false },
            3,
        )
        .unwrap();
        forced_seen |= ro.steps.iter().any(|s| s.forced);
        for (i, _) in ro.steps.iter().enumerate().filter(|(_, s)| s.forced) {
            assert!(i > 0 && ro.trace.steps[i - 1].stack_depth == 2);
        }
    }
    assert!(forced_seen);
}

#[test]
fn oracle_rule_always_succeeds() {
    let ws = world_set();
    let env = IntentionEnv::new(&ws, EnvConfig::default()).unwrap();
    for t in tasks(&ws, 100, (1, 10), 6) {
        let ro =
            rollout_seeded(&env, &t, Controller::Baseline(BaselineKind::NoAssist), Executor::Oracle, Default::default(), 1)
                .unwrap();
        assert!(ro.trace.success);
        assert_eq!(ro.trace.count(IntentAction::Do), ws.world(t.world).distance(t.start, t.goal));
    }
}

#[test]
fn short_dagger_run_is_reproducible() {
    let ws = world_set();
    let train = tasks(&ws, 64, (1, 5), 7);
    let val = tasks(&ws, 20, (1, 5), 8);
    let cfg = PretrainConfig { iterations: 6, batch_size: 8, eval_every: 3, val_tasks: 20, ..Default::default() };
    let run = || {
        let p = ExecPolicy::new(ExecConfig { hidden: 12, init_scale: 0.08 }, &mut ChaCha8Rng::seed_from_u64(1));
        dagger_pretrain(&ws, &train, &val, p, &cfg, &mut ChaCha8Rng::seed_from_u64(2)).unwrap()
    };
    let a = run();
    let b = run();
    assert_eq!(a.log, b.log);
    assert_eq!(a.policy, b.policy);
    assert_eq!(a.log.iter().filter(|r| r.val_success.is_some()).count(), 2);
}
