//! Runs one intention episode under a learned or rule-based controller.

use rand::RngCore;

use super::dagger::sample_index;
use crate::env::{IntentAction, IntentionEnv, IntentionState, MoveSelector, StepRecord};
use crate::error::Result;
use crate::harness::EpisodeTrace;
use crate::nn::argmax;
use crate::policy::{
    action_features, baseline_policy, legal_actions, oracle_exec_action, BaselineKind, BaselineObs, BaselineState,
    BeliefState, ExecPolicy, IntentObs, IntentionModel,
};
use crate::world::{ExecAction, NodeId, Task, WorldSet};

#[derive(Debug, Clone, Copy)]
pub enum Controller<'a> {
    /// Samples from the actor when `sample` is set, otherwise takes its argmax.
    Learned { model: &'a IntentionModel, sample: bool },
    Baseline(BaselineKind),
}

#[derive(Debug, Clone, Copy)]
pub enum Executor<'a> {
    Learned(&'a ExecPolicy),
    Oracle,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RolloutOptions {
    /// Force DONE on a subgoal whose step budget is used up.
    pub enforce_sub_budget: bool,
    /// Subgoal legs are executed by the shortest-path oracle.
    pub skyline: bool,
}

/// Actor-side record of one step, enough to replay the actor and critic.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorStep {
    pub x: Vec<f64>,
    pub mask: [bool; 5],
    pub action: IntentAction,
    /// DONE imposed by the driver rather than chosen by the actor.
    pub forced: bool,
    pub shaped_cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub trace: EpisodeTrace,
    pub steps: Vec<ActorStep>,
}

struct FixedMove(NodeId);

impl MoveSelector for FixedMove {
    fn select_move(&mut self, _: &WorldSet, _: &IntentionState) -> Result<NodeId> {
        Ok(self.0)
    }
}

pub fn rollout(
    env: &IntentionEnv<'_>,
    task: &Task,
    controller: Controller<'_>,
    executor: Executor<'_>,
    opts: RolloutOptions,
    seed: u64,
    mut rng: &mut dyn RngCore,
) -> Result<Rollout> {
    let worlds = env.worlds();
    let g = worlds.world(task.world);
    let horizon = env.config().cost.horizon;
    let mut st = env.reset(task);
    let mut belief: Option<BeliefState> = match executor {
        Executor::Learned(p) => Some(p.belief_update(&p.initial_belief(), &st.cur_desc, None)),
        Executor::Oracle => None,
    };
    // belief before the latest update and the move that led to it; a refreshed
    // description redoes that update instead of adding a step
    let mut before_last = belief.as_ref().map(|_| (policy_initial(executor), None));
    let (mut hidden, belief_dim) = match controller {
        Controller::Learned { model, .. } => (Some(model.initial_hidden()), model.cfg.belief_dim),
        Controller::Baseline(_) => (None, 0),
    };
    let zero_belief = vec![0.0; belief_dim];
    let mut base_state = match controller {
        Controller::Baseline(kind) => Some(BaselineState::new(&kind, &mut rng)),
        Controller::Learned { .. } => None,
    };
    let mut prev: Option<IntentAction> = None;
    let mut records = Vec::new();
    let mut steps = Vec::new();
    while !st.terminated {
        let top = st.stack.top().expect("live state has a goal").clone();
        let legal = legal_actions(g, st.exec);
        let cands = action_features(g, st.exec, &legal);
        let oracle_leg = matches!(executor, Executor::Oracle) || (opts.skyline && st.stack.len() > 1);
        let probs = match (&belief, executor) {
            (Some(b), Executor::Learned(p)) if !oracle_leg => p.exec_action_dist(b, &top.desc, &cands),
            _ => {
                let a = oracle_exec_action(g, st.exec, top.goal);
                legal.iter().map(|l| if *l == a { 1.0 } else { 0.0 }).collect()
            }
        };
        let mask = env.action_mask(&st)?;
        let forced = opts.enforce_sub_budget && st.stack.len() > 1 && top.budget == Some(0);
        let mut x = Vec::new();
        let action = match controller {
            Controller::Learned { model, sample } => {
                let b = belief.as_ref().map_or(&zero_belief[..], |b| &b.h[..]);
                x = model.features(&IntentObs {
                    belief: b,
                    exec_probs: &probs,
                    prev,
                    depth: st.stack.len(),
                    t: st.t,
                    horizon,
                    sub_budget: top.budget,
                });
                let (next, cache) = model.step(hidden.as_ref().expect("learned controller"), &x, &mask)?;
                hidden = Some(next);
                if forced {
                    IntentAction::Done
                } else if sample {
                    IntentAction::from_index(sample_index(&cache.probs, &mut rng))
                } else {
                    IntentAction::from_index(argmax(&cache.probs))
                }
            }
            Controller::Baseline(kind) => {
                let obs = BaselineObs { t: st.t, exec_says_done: argmax(&probs) == 0, depth: st.stack.len(), mask };
                let a = baseline_policy(&kind, &obs, base_state.as_mut().expect("baseline state"), &mut rng);
                if forced {
                    IntentAction::Done
                } else {
                    a
                }
            }
        };
        // DO never executes stop: take the best move
        let k = 1 + argmax(&probs[1..]);
        let ExecAction::Move(to) = legal[k] else { unreachable!("moves follow stop") };
        let out = env.step(&st, action, &mut FixedMove(to), &mut *rng)?;
        if let (Some(b), Some((prior, moved)), Executor::Learned(p)) = (belief.as_mut(), before_last.as_mut(), executor) {
            match out.answered.unwrap_or(action) {
                IntentAction::Cur => *b = p.belief_update(prior, &out.next.cur_desc, moved.as_ref()),
                IntentAction::Do => {
                    *prior = b.clone();
                    *moved = Some(cands[k]);
                    *b = p.belief_update(prior, &out.next.cur_desc, moved.as_ref());
                }
                _ => {}
            }
        }
        records.push(StepRecord::from_outcome(st.t, action, &out));
        steps.push(ActorStep { x, mask, action, forced, shaped_cost: out.shaped_cost });
        prev = Some(action);
        st = out.next;
    }
    let success = records.last().is_some_and(|r| r.action == IntentAction::Done && r.stack_depth == 0)
        && st.exec == task.goal;
    let trace = EpisodeTrace {
        task_id: task.id,
        seed,
        world: task.world,
        start: task.start,
        goal: task.goal,
        total_raw: records.iter().map(|r| r.raw_cost).sum(),
        total_shaped: records.iter().map(|r| r.shaped_cost).sum(),
        steps: records,
        final_node: st.exec,
        success,
    };
    Ok(Rollout { trace, steps })
}

fn policy_initial(executor: Executor<'_>) -> BeliefState {
    match executor {
        Executor::Learned(p) => p.initial_belief(),
        Executor::Oracle => unreachable!("oracle execution keeps no belief"),
    }
}

/// Per-episode seed derived from a run seed and the task id.
pub fn episode_seed(run_seed: u64, task_id: u32) -> u64 {
    run_seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (task_id as u64).wrapping_mul(0xD1B5_4A32_D192_ED03)
}

/// Convenience wrapper seeding a fresh generator per episode.
pub fn rollout_seeded(
    env: &IntentionEnv<'_>,
    task: &Task,
    controller: Controller<'_>,
    executor: Executor<'_>,
    opts: RolloutOptions,
    seed: u64,
) -> Result<Rollout> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    rollout(env, task, controller, executor, opts, seed, &mut rng)
}
