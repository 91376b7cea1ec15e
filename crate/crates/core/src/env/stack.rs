use serde::{Deserialize, Serialize};

use super::IntentAction;
use crate::error::{Error, Result};
use crate::world::{Description, NodeId};

#[derive(Debug, Clone, PartialEq)]
pub struct GoalEntry {
    pub goal: NodeId,
    pub desc: Description,
    /// Remaining step budget for subgoals; `None` for the main goal.
    pub budget: Option<usize>,
}

/// Bounded stack of (goal, description) pairs, bottom to top. The bottom is
/// the main goal for the whole episode.
#[derive(Debug, Clone, PartialEq)]
pub struct GoalStack {
    entries: Vec<GoalEntry>,
    capacity: usize,
}

/// Argument of a stack update.
#[derive(Debug, Clone, PartialEq)]
pub enum StackPayload {
    Describe(Description),
    Push(NodeId, Description, Option<usize>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StackEffect {
    Replaced,
    Pushed,
    Popped,
    Emptied,
}

impl GoalStack {
    pub fn new(goal: NodeId, desc: Description, capacity: usize) -> Self {
        assert!(capacity >= 1, "stack capacity must be positive");
        GoalStack { entries: vec![GoalEntry { goal, desc, budget: None }], capacity }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() >= self.capacity
    }

    pub fn top(&self) -> Option<&GoalEntry> {
        self.entries.last()
    }

    pub fn top_mut(&mut self) -> Option<&mut GoalEntry> {
        self.entries.last_mut()
    }

    pub fn main(&self) -> Option<&GoalEntry> {
        self.entries.first()
    }

    pub fn entries(&self) -> &[GoalEntry] {
        &self.entries
    }

    /// Goal-description projection, bottom to top.
    pub fn descriptions(&self) -> Vec<&Description> {
        self.entries.iter().map(|e| &e.desc).collect()
    }

    /// Applies GOAL (replace top description), SUB (push) or DONE (pop).
    pub fn apply(&mut self, a: IntentAction, payload: Option<StackPayload>) -> Result<StackEffect> {
        match (a, payload) {
            (IntentAction::Goal, Some(StackPayload::Describe(desc))) => {
                let top = self.entries.last_mut().ok_or_else(|| Error::Stack("empty stack".into()))?;
                top.desc = desc;
                Ok(StackEffect::Replaced)
            }
            (IntentAction::Sub, Some(StackPayload::Push(goal, desc, budget))) => {
                if self.is_full() {
                    return Err(Error::Stack(format!("push onto full stack of {}", self.capacity)));
                }
                self.entries.push(GoalEntry { goal, desc, budget });
                Ok(StackEffect::Pushed)
            }
            (IntentAction::Done, None) => {
                self.entries.pop().ok_or_else(|| Error::Stack("pop from empty stack".into()))?;
                Ok(if self.entries.is_empty() { StackEffect::Emptied } else { StackEffect::Popped })
            }
            (a, p) => Err(Error::Stack(format!("{a} cannot update the stack with payload {p:?}"))),
        }
    }

    /// Pure form of [`GoalStack::apply`].
    pub fn update(&self, a: IntentAction, payload: Option<StackPayload>) -> Result<GoalStack> {
        let mut next = self.clone();
        next.apply(a, payload)?;
        Ok(next)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{FeatureSet, Origin, Token};

    fn desc(room: usize) -> Description {
        Description { features: vec![FeatureSet::room(Token::room(room))], origin: Origin::TaskRequest }
    }

    #[test]
    fn goal_replaces_top_description() {
        let s = GoalStack::new(NodeId(4), desc(0), 2);
        let t = s.update(IntentAction::Goal, Some(StackPayload::Describe(desc(1)))).unwrap();
        assert_eq!(t.top().unwrap().goal, NodeId(4));
        assert_eq!(t.top().unwrap().desc, desc(1));
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn push_then_pop_restores() {
        let s = GoalStack::new(NodeId(4), desc(0), 2);
        let pushed = s.update(IntentAction::Sub, Some(StackPayload::Push(NodeId(2), desc(3), Some(6)))).unwrap();
        assert!(pushed.is_full());
        assert!(pushed.update(IntentAction::Sub, Some(StackPayload::Push(NodeId(1), desc(3), None))).is_err());
        let popped = pushed.update(IntentAction::Done, None).unwrap();
        assert_eq!(popped, s);
    }

    #[test]
    fn non_stack_actions_rejected() {
        let s = GoalStack::new(NodeId(4), desc(0), 2);
        assert!(s.update(IntentAction::Cur, None).is_err());
        assert!(s.update(IntentAction::Do, None).is_err());
        assert!(s.update(IntentAction::Goal, None).is_err());
        let mut e = s.clone();
        assert_eq!(e.apply(IntentAction::Done, None).unwrap(), StackEffect::Emptied);
    }
}
