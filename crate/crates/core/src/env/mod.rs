//! The intention environment: a POMDP wrapped around graph navigation whose
//! actions are the five intentions. State is (execution node, current
//! description, goal stack); observations expose descriptions only.

mod stack;

use serde::{Deserialize, Serialize};

pub use stack::{GoalEntry, GoalStack, StackEffect, StackPayload};

use crate::assistant::{uncooperative, Assistant, AssistantReply, ReplyKind};
use crate::error::{Error, Result};
use crate::world::{Description, ExecAction, NodeId, Task, WorldId, WorldSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum IntentAction {
    Cur,
    Goal,
    Sub,
    Do,
    Done,
}

impl IntentAction {
    pub const ALL: [IntentAction; 5] =
        [IntentAction::Cur, IntentAction::Goal, IntentAction::Sub, IntentAction::Do, IntentAction::Done];
    pub const COUNT: usize = 5;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> IntentAction {
        Self::ALL[i]
    }

    pub fn as_str(self) -> &'static str {
        match self {
            IntentAction::Cur => "CUR",
            IntentAction::Goal => "GOAL",
            IntentAction::Sub => "SUB",
            IntentAction::Do => "DO",
            IntentAction::Done => "DONE",
        }
    }

    pub fn parse(s: &str) -> Result<IntentAction> {
        Self::ALL.into_iter().find(|a| a.as_str() == s).ok_or_else(|| Error::Parse(format!("unknown action {s}")))
    }

    pub fn is_request(self) -> bool {
        matches!(self, IntentAction::Cur | IntentAction::Goal | IntentAction::Sub)
    }
}

impl std::fmt::Display for IntentAction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostConfig {
    pub gamma_cur: f64,
    pub gamma_goal: f64,
    pub gamma_sub: f64,
    pub gamma_do: f64,
    pub shaping: bool,
    pub horizon: usize,
}

impl Default for CostConfig {
    fn default() -> Self {
        CostConfig { gamma_cur: 0.01, gamma_goal: 0.01, gamma_sub: 0.01, gamma_do: 0.01, shaping: true, horizon: 30 }
    }
}

impl CostConfig {
    pub fn uniform(cost: f64) -> Self {
        CostConfig { gamma_cur: cost, gamma_goal: cost, gamma_sub: cost, gamma_do: cost, ..Default::default() }
    }

    pub fn gamma(&self, a: IntentAction) -> f64 {
        match a {
            IntentAction::Cur => self.gamma_cur,
            IntentAction::Goal => self.gamma_goal,
            IntentAction::Sub => self.gamma_sub,
            IntentAction::Do => self.gamma_do,
            IntentAction::Done => 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let g = [self.gamma_cur, self.gamma_goal, self.gamma_sub, self.gamma_do];
        if g.iter().any(|x| !(*x >= 0.0)) || self.horizon == 0 {
            return Err(Error::Config("costs must be non-negative and the horizon positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    pub cost: CostConfig,
    pub stack_size: usize,
    pub assistant: Assistant,
    /// Subgoal step budget as a multiple of the subgoal's shortest distance.
    pub sub_budget_factor: usize,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig { cost: CostConfig::default(), stack_size: 2, assistant: Assistant::default(), sub_budget_factor: 3 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntentionState {
    pub world: WorldId,
    pub exec: NodeId,
    pub cur_desc: Description,
    pub stack: GoalStack,
    pub t: usize,
    pub terminated: bool,
}

impl IntentionState {
    pub fn current_goal(&self) -> Option<&GoalEntry> {
        self.stack.top()
    }

    pub fn observe(&self) -> Observation<'_> {
        Observation { cur_desc: &self.cur_desc, goal_descs: self.stack.descriptions() }
    }
}

/// What the agent sees: the current description and the goal-description stack.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation<'a> {
    pub cur_desc: &'a Description,
    pub goal_descs: Vec<&'a Description>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next: IntentionState,
    pub raw_cost: f64,
    pub shaped_cost: f64,
    pub reply: Option<AssistantReply>,
    pub exec_action: Option<ExecAction>,
    /// The intention the assistant actually answered (differs from the
    /// request only with an uncooperative assistant).
    pub answered: Option<IntentAction>,
    pub time_limit: bool,
}

/// Chooses the primitive move that DO executes.
pub trait MoveSelector {
    fn select_move(&mut self, worlds: &WorldSet, st: &IntentionState) -> Result<NodeId>;
}

/// Shortest-path oracle toward the current top goal. At the goal itself the
/// stop action is excluded from DO, so the lowest-id neighbor is chosen.
#[derive(Debug, Default, Clone, Copy)]
pub struct OracleMoves;

impl MoveSelector for OracleMoves {
    fn select_move(&mut self, worlds: &WorldSet, st: &IntentionState) -> Result<NodeId> {
        let g = worlds.world(st.world);
        let goal = st.stack.top().ok_or(Error::Terminated)?.goal;
        let path = g.shortest_path(st.exec, goal)?;
        Ok(path.get(1).copied().unwrap_or(g.neighbors(st.exec)[0]))
    }
}

pub struct IntentionEnv<'a> {
    worlds: &'a WorldSet,
    cfg: EnvConfig,
}

impl<'a> IntentionEnv<'a> {
    pub fn new(worlds: &'a WorldSet, cfg: EnvConfig) -> Result<Self> {
        cfg.cost.validate()?;
        if cfg.stack_size == 0 {
            return Err(Error::Config("stack size must be at least 1".into()));
        }
        Ok(IntentionEnv { worlds, cfg })
    }

    pub fn worlds(&self) -> &'a WorldSet {
        self.worlds
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn reset(&self, task: &Task) -> IntentionState {
        IntentionState {
            world: task.world,
            exec: task.start,
            cur_desc: self.worlds.sparse_state(task.world, task.start).clone(),
            stack: GoalStack::new(task.goal, task.goal_desc.clone(), self.cfg.stack_size),
            t: 1,
            terminated: false,
        }
    }

    pub fn available_actions(&self, st: &IntentionState) -> Result<Vec<IntentAction>> {
        Ok(IntentAction::ALL.into_iter().zip(self.action_mask(st)?).filter(|(_, ok)| *ok).map(|(a, _)| a).collect())
    }

    /// Availability in [`IntentAction::ALL`] order; SUB is masked on a full stack.
    pub fn action_mask(&self, st: &IntentionState) -> Result<[bool; 5]> {
        if st.terminated {
            return Err(Error::Terminated);
        }
        let mut mask = [true; 5];
        mask[IntentAction::Sub.index()] = !st.stack.is_full();
        Ok(mask)
    }

    fn task_error_to_main(&self, st: &IntentionState) -> f64 {
        let main = st.stack.main().expect("live state has a main goal").goal;
        self.worlds.world(st.world).distance(st.exec, main) as f64
    }

    pub fn raw_cost(&self, st: &IntentionState, a: IntentAction) -> f64 {
        match a {
            IntentAction::Done if st.stack.len() == 1 => self.task_error_to_main(st),
            IntentAction::Done => 0.0,
            a => self.cfg.cost.gamma(a),
        }
    }

    /// Task error with respect to the current top goal; zero once terminated.
    pub fn potential(&self, st: &IntentionState) -> f64 {
        if st.terminated {
            return 0.0;
        }
        match st.stack.top() {
            Some(top) => self.worlds.world(st.world).distance(st.exec, top.goal) as f64,
            None => 0.0,
        }
    }

    pub fn step(
        &self,
        st: &IntentionState,
        a: IntentAction,
        moves: &mut dyn MoveSelector,
        mut rng: &mut dyn rand::RngCore,
    ) -> Result<StepOutcome> {
        let mask = self.action_mask(st)?;
        if !mask[a.index()] || st.t > self.cfg.cost.horizon {
            return Err(Error::UnavailableAction(a.to_string()));
        }
        let g = self.worlds.world(st.world);
        let mut next = st.clone();
        let mut raw = self.raw_cost(st, a);
        let mut reply = None;
        let mut exec_action = None;
        let mut answered = None;

        let intent = if a.is_request() && !self.cfg.assistant.cooperative {
            loop {
                let drawn = uncooperative(a, &mut rng);
                if drawn != IntentAction::Sub || !st.stack.is_full() {
                    break drawn;
                }
            }
        } else {
            a
        };
        let top_goal = st.stack.top().expect("live state has a goal").goal;
        match intent {
            IntentAction::Cur => {
                let r = self.cfg.assistant.describe_state(self.worlds, st.world, st.exec);
                next.cur_desc = r.desc.clone();
                reply = Some(r);
            }
            IntentAction::Goal => {
                let r = self.cfg.assistant.describe_goal(self.worlds, st.world, top_goal);
                next.stack.apply(IntentAction::Goal, Some(StackPayload::Describe(r.desc.clone())))?;
                reply = Some(r);
            }
            IntentAction::Sub => {
                let r = self.cfg.assistant.propose_subgoal(self.worlds, st.world, st.exec, top_goal)?;
                let sub = r.subgoal.expect("subgoal replies carry a node");
                let budget = self.cfg.sub_budget_factor * g.distance(st.exec, sub);
                next.stack.apply(IntentAction::Sub, Some(StackPayload::Push(sub, r.desc.clone(), Some(budget))))?;
                reply = Some(r);
            }
            IntentAction::Do => {
                let to = moves.select_move(self.worlds, st)?;
                let action = ExecAction::Move(to);
                next.exec = g.exec_step(st.exec, action)?;
                next.cur_desc = self.worlds.sparse_state(st.world, next.exec).clone();
                exec_action = Some(action);
            }
            IntentAction::Done => {
                if next.stack.apply(IntentAction::Done, None)? == StackEffect::Emptied {
                    next.terminated = true;
                }
            }
        }
        if a.is_request() {
            answered = Some(intent);
        }
        // subgoal budgets tick while the subgoal stays on top
        if !matches!(intent, IntentAction::Sub | IntentAction::Done) && next.stack.len() > 1 {
            if let Some(b) = next.stack.top_mut().and_then(|e| e.budget.as_mut()) {
                *b = b.saturating_sub(1);
            }
        }

        let mut time_limit = false;
        if !next.terminated && st.t >= self.cfg.cost.horizon {
            raw += self.task_error_to_main(&next);
            next.terminated = true;
            time_limit = true;
        }
        next.t = st.t + 1;
        let shaped = if self.cfg.cost.shaping { raw + self.potential(&next) - self.potential(st) } else { raw };
        Ok(StepOutcome { next, raw_cost: raw, shaped_cost: shaped, reply, exec_action, answered, time_limit })
    }
}

/// One line of an episode trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub action: IntentAction,
    /// Execution node after the step.
    pub exec_node: NodeId,
    /// Stack depth after the step.
    pub stack_depth: usize,
    pub raw_cost: f64,
    pub shaped_cost: f64,
    pub reply_kind: Option<ReplyKind>,
}

impl StepRecord {
    pub fn from_outcome(t: usize, action: IntentAction, out: &StepOutcome) -> Self {
        StepRecord {
            t,
            action,
            exec_node: out.next.exec,
            stack_depth: out.next.stack.len(),
            raw_cost: out.raw_cost,
            shaped_cost: out.shaped_cost,
            reply_kind: out.reply.as_ref().map(|r| r.kind),
        }
    }
}
