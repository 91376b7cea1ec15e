use rand::seq::index::sample;
use rand::Rng;

use crate::policy::oracle_exec_action;
use crate::world::{action_description, Description, Task, WorldSet};

/// Keeps `m ~ U{min(5, n), …, n}` of the `n` feature sets, chosen uniformly
/// without replacement; the kept sets stay in their original order.
pub fn drop_features(d: &Description, rng: &mut impl Rng) -> Description {
    let n = d.features.len();
    let lo = n.min(5);
    let m = rng.random_range(lo..=n);
    if m == n {
        return d.clone();
    }
    let mut keep = sample(rng, n, m).into_vec();
    keep.sort_unstable();
    Description { features: keep.into_iter().map(|i| d.features[i]).collect(), origin: d.origin }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GoalBranch {
    Dense,
    Sparse,
    NextAction,
}

/// Goal description used during pre-training: dense or the task's sparse
/// description, plus the next ground-truth action when the goal is at most one
/// edge away.
pub fn sample_goal_desc(task: &Task, worlds: &WorldSet, rng: &mut impl Rng) -> Description {
    sample_goal_branch(task, worlds, rng).1
}

pub fn sample_goal_branch(task: &Task, worlds: &WorldSet, rng: &mut impl Rng) -> (GoalBranch, Description) {
    let g = worlds.world(task.world);
    let near = task.start == task.goal || g.is_adjacent(task.start, task.goal);
    let branch = if near { rng.random_range(0..3) } else { rng.random_range(0..2) };
    match branch {
        0 => (GoalBranch::Dense, worlds.dense_goal(task.world, task.goal).clone()),
        1 => (GoalBranch::Sparse, task.goal_desc.clone()),
        _ => (
            GoalBranch::NextAction,
            action_description(g, task.start, oracle_exec_action(g, task.start, task.goal)),
        ),
    }
}
