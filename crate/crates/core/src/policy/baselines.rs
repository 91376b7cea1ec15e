//! Rule-based intention policies.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::IntentAction;
use crate::error::{Error, Result};

/// Per-type mean action budgets for the budget-matched baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetX {
    pub cur: f64,
    pub goal: f64,
    pub sub: f64,
    pub do_: f64,
}

impl BudgetX {
    pub fn get(&self, a: IntentAction) -> f64 {
        match a {
            IntentAction::Cur => self.cur,
            IntentAction::Goal => self.goal,
            IntentAction::Sub => self.sub,
            IntentAction::Do => self.do_,
            IntentAction::Done => 0.0,
        }
    }

    pub fn set(&mut self, a: IntentAction, v: f64) {
        match a {
            IntentAction::Cur => self.cur = v,
            IntentAction::Goal => self.goal = v,
            IntentAction::Sub => self.sub = v,
            IntentAction::Do => self.do_ = v,
            IntentAction::Done => {}
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BaselineKind {
    NoAssist,
    DenseGoal,
    DenseCur,
    DenseBoth,
    BudgetMatched(BudgetX),
}

impl BaselineKind {
    pub fn name(&self) -> &'static str {
        match self {
            BaselineKind::NoAssist => "no-assist",
            BaselineKind::DenseGoal => "dense-goal",
            BaselineKind::DenseCur => "dense-cur",
            BaselineKind::DenseBoth => "dense-both",
            BaselineKind::BudgetMatched(_) => "budget-matched",
        }
    }

    /// Parses the rule-based kinds; the budget-matched baseline needs its budgets.
    pub fn parse(s: &str) -> Result<BaselineKind> {
        Ok(match s {
            "no-assist" => BaselineKind::NoAssist,
            "dense-goal" => BaselineKind::DenseGoal,
            "dense-cur" => BaselineKind::DenseCur,
            "dense-both" => BaselineKind::DenseBoth,
            _ => return Err(Error::Config(format!("unknown baseline {s}"))),
        })
    }
}

/// What a baseline looks at each step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineObs {
    pub t: usize,
    /// The execution policy's most probable action is stop.
    pub exec_says_done: bool,
    pub depth: usize,
    pub mask: [bool; 5],
}

/// Per-episode mutable state (remaining budgets, previous action).
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineState {
    pub budget: [usize; 5],
    pub prev: Option<IntentAction>,
}

/// `⌊x⌋ + y`, `y ~ Bernoulli(x − ⌊x⌋)`.
pub fn draw_budget(x: f64, rng: &mut impl Rng) -> usize {
    let base = x.max(0.0).floor();
    base as usize + rng.random_bool((x.max(0.0) - base).clamp(0.0, 1.0)) as usize
}

impl BaselineState {
    pub fn new(kind: &BaselineKind, rng: &mut impl Rng) -> Self {
        let mut budget = [0; 5];
        if let BaselineKind::BudgetMatched(x) = kind {
            for a in [IntentAction::Cur, IntentAction::Goal, IntentAction::Sub, IntentAction::Do] {
                budget[a.index()] = draw_budget(x.get(a), rng);
            }
        }
        BaselineState { budget, prev: None }
    }
}

pub fn baseline_policy(kind: &BaselineKind, o: &BaselineObs, st: &mut BaselineState, rng: &mut impl Rng) -> IntentAction {
    use IntentAction::*;
    let a = match kind {
        BaselineKind::NoAssist => {
            if o.exec_says_done {
                Done
            } else {
                Do
            }
        }
        BaselineKind::DenseGoal => {
            if o.t == 1 {
                Goal
            } else if o.exec_says_done {
                Done
            } else {
                Do
            }
        }
        BaselineKind::DenseCur | BaselineKind::DenseBoth => {
            if o.t == 1 && matches!(kind, BaselineKind::DenseBoth) {
                Goal
            } else if o.exec_says_done {
                Done
            } else if st.prev == Some(Cur) {
                Do
            } else {
                Cur
            }
        }
        BaselineKind::BudgetMatched(_) => budget_matched(o, st, rng),
    };
    st.budget[a.index()] = st.budget[a.index()].saturating_sub(1);
    st.prev = Some(a);
    a
}

fn budget_matched(o: &BaselineObs, st: &BaselineState, rng: &mut impl Rng) -> IntentAction {
    use IntentAction::*;
    if o.t == 1 && st.budget[Goal.index()] > 0 {
        return Goal;
    }
    if o.exec_says_done && (o.depth > 1 || st.budget[Sub.index()] == 0) {
        return Done;
    }
    let options: Vec<IntentAction> =
        [Cur, Goal, Sub, Do].into_iter().filter(|a| o.mask[a.index()] && st.budget[a.index()] > 0).collect();
    if options.is_empty() {
        Done
    } else {
        options[rng.random_range(0..options.len())]
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn obs(t: usize, done: bool) -> BaselineObs {
        BaselineObs { t, exec_says_done: done, depth: 1, mask: [true; 5] }
    }

    fn run(kind: BaselineKind, done_at: usize) -> Vec<IntentAction> {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut st = BaselineState::new(&kind, &mut rng);
        let mut out = Vec::new();
        for t in 1..=20 {
            let a = baseline_policy(&kind, &obs(t, t >= done_at), &mut st, &mut rng);
            out.push(a);
            if a == IntentAction::Done {
                break;
            }
        }
        out
    }

    #[test]
    fn dense_goal_asks_once_first() {
        use IntentAction::*;
        let tr = run(BaselineKind::DenseGoal, 5);
        assert_eq!(tr, vec![Goal, Do, Do, Do, Done]);
        assert_eq!(tr.iter().filter(|a| **a == Goal).count(), 1);
    }

    #[test]
    fn dense_cur_alternates() {
        use IntentAction::*;
        assert_eq!(run(BaselineKind::DenseCur, 5), vec![Cur, Do, Cur, Do, Done]);
        assert_eq!(run(BaselineKind::DenseBoth, 5), vec![Goal, Cur, Do, Cur, Done]);
        assert_eq!(run(BaselineKind::NoAssist, 3), vec![Do, Do, Done]);
    }

    #[test]
    fn integer_budget_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let kind = BaselineKind::BudgetMatched(BudgetX { cur: 2.0, goal: 1.0, sub: 1.7, do_: 6.0 });
        for _ in 0..1000 {
            let st = BaselineState::new(&kind, &mut rng);
            assert_eq!(st.budget[IntentAction::Cur.index()], 2);
            assert!(matches!(st.budget[IntentAction::Sub.index()], 1 | 2));
        }
    }

    #[test]
    fn budget_matched_respects_budgets() {
        use IntentAction::*;
        let kind = BaselineKind::BudgetMatched(BudgetX { cur: 2.0, goal: 1.0, sub: 0.0, do_: 3.0 });
        let tr = run(kind, 100);
        assert_eq!(tr[0], Goal);
        assert_eq!(*tr.last().unwrap(), Done);
        assert_eq!(tr.iter().filter(|a| **a == Cur).count(), 2);
        assert_eq!(tr.iter().filter(|a| **a == Do).count(), 3);
        assert_eq!(tr.iter().filter(|a| **a == Sub).count(), 0);
    }
}
