//! The simulated assistant: dense state and goal descriptions, the midpoint
//! subgoal rule, and the uncooperative variant.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::IntentAction;
use crate::error::Result;
use crate::world::describe::{action_description, dense_description, Description, Origin, Role};
use crate::world::{ExecAction, NodeId, WorldGraph, WorldId, WorldSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplyKind {
    StateDesc,
    GoalDesc,
    SubgoalDesc,
}

impl ReplyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ReplyKind::StateDesc => "state",
            ReplyKind::GoalDesc => "goal",
            ReplyKind::SubgoalDesc => "subgoal",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssistantReply {
    pub kind: ReplyKind,
    pub desc: Description,
    pub subgoal: Option<NodeId>,
}

pub const DEFAULT_L_MAX: usize = 3;

/// Dense description of `s`. The prior description is part of the interface
/// but this assistant always answers with full perception.
pub fn describe_state(g: &WorldGraph, s: NodeId, _current: &Description) -> AssistantReply {
    let mut desc = dense_description(g, s, Role::CurrentState);
    desc.origin = Origin::AssistantState;
    AssistantReply { kind: ReplyKind::StateDesc, desc, subgoal: None }
}

pub fn describe_goal(g: &WorldGraph, goal: NodeId, _current: &Description) -> AssistantReply {
    let desc = dense_description(g, goal, Role::Goal);
    AssistantReply { kind: ReplyKind::GoalDesc, desc, subgoal: None }
}

/// Index of the subgoal on the shortest path of `path_nodes` nodes.
pub fn subgoal_index(path_nodes: usize, l_max: usize) -> usize {
    (path_nodes / 2).min(l_max)
}

/// Subgoal `p[k]` with `k = min(|p| / 2, l_max)` on the shortest path to `goal`.
/// An adjacent subgoal is described by the move that reaches it; `s == goal`
/// yields a stop action.
pub fn propose_subgoal(g: &WorldGraph, s: NodeId, goal: NodeId, l_max: usize) -> Result<AssistantReply> {
    let path = g.shortest_path(s, goal)?;
    let sub = path[subgoal_index(path.len(), l_max)];
    let desc = if sub == s {
        action_description(g, s, ExecAction::Done)
    } else if g.is_adjacent(s, sub) {
        action_description(g, s, ExecAction::Move(sub))
    } else {
        dense_description(g, sub, Role::Goal)
    };
    Ok(AssistantReply { kind: ReplyKind::SubgoalDesc, desc, subgoal: Some(sub) })
}

/// Ignores the requested intention and draws one of CUR, GOAL, SUB uniformly.
pub fn uncooperative(_reply_for: IntentAction, rng: &mut impl Rng) -> IntentAction {
    [IntentAction::Cur, IntentAction::Goal, IntentAction::Sub][rng.random_range(0..3)]
}

/// Assistant bound to behavior toggles; uses the world set's description caches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Assistant {
    pub l_max: usize,
    pub cooperative: bool,
}

impl Default for Assistant {
    fn default() -> Self {
        Assistant { l_max: DEFAULT_L_MAX, cooperative: true }
    }
}

impl Assistant {
    pub fn describe_state(&self, worlds: &WorldSet, w: WorldId, s: NodeId) -> AssistantReply {
        let mut desc = worlds.dense_state(w, s).clone();
        desc.origin = Origin::AssistantState;
        AssistantReply { kind: ReplyKind::StateDesc, desc, subgoal: None }
    }

    pub fn describe_goal(&self, worlds: &WorldSet, w: WorldId, goal: NodeId) -> AssistantReply {
        AssistantReply { kind: ReplyKind::GoalDesc, desc: worlds.dense_goal(w, goal).clone(), subgoal: None }
    }

    pub fn propose_subgoal(&self, worlds: &WorldSet, w: WorldId, s: NodeId, goal: NodeId) -> Result<AssistantReply> {
        let g = worlds.world(w);
        let path = g.shortest_path(s, goal)?;
        let sub = path[subgoal_index(path.len(), self.l_max)];
        let desc = if sub == s {
            action_description(g, s, ExecAction::Done)
        } else if g.is_adjacent(s, sub) {
            action_description(g, s, ExecAction::Move(sub))
        } else {
            worlds.dense_goal(w, sub).clone()
        };
        Ok(AssistantReply { kind: ReplyKind::SubgoalDesc, desc, subgoal: Some(sub) })
    }
}
