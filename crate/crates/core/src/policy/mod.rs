//! Decision-makers: the learned execution policy, the intention actor and
//! critic, the shortest-path oracle and the rule-based intention baselines.

pub mod baselines;
pub mod checkpoint;
pub mod exec;
pub mod intent;

pub use baselines::{baseline_policy, draw_budget, BaselineKind, BaselineObs, BaselineState, BudgetX};
pub use exec::{action_features, legal_actions, BeliefState, ExecConfig, ExecPolicy};
pub use intent::{exec_summary, IntentConfig, IntentHidden, IntentObs, IntentionModel};

use crate::world::{ExecAction, NodeId, WorldGraph};

/// Stop at the goal, otherwise the first edge of the shortest path.
pub fn oracle_exec_action(g: &WorldGraph, s: NodeId, goal: NodeId) -> ExecAction {
    if s == goal {
        return ExecAction::Done;
    }
    let path = g.shortest_path(s, goal).expect("worlds are connected");
    ExecAction::Move(path[1])
}
