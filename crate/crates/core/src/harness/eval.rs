//! Evaluation of a fixed intention policy over named task conditions.

use super::metrics::MetricsReport;
use super::trace::EpisodeTrace;
use crate::env::IntentionEnv;
use crate::error::{Error, Result};
use crate::policy::{BaselineKind, ExecPolicy, IntentionModel};
use crate::training::{episode_seed, rollout_seeded, Controller, Executor, RolloutOptions};
use crate::world::Task;

/// Intention policy plus the execution policy it drives.
#[derive(Debug, Clone, Copy)]
pub enum PolicySpec<'a> {
    Learned { model: &'a IntentionModel, exec: &'a ExecPolicy },
    Baseline { kind: BaselineKind, exec: &'a ExecPolicy },
    /// Shortest-path execution with the DO-until-stop-then-DONE rule.
    Oracle,
    /// Learned intentions; subgoal legs are executed by the oracle.
    Skyline { model: &'a IntentionModel, exec: &'a ExecPolicy },
}

impl<'a> PolicySpec<'a> {
    fn parts(&self) -> (Controller<'a>, Executor<'a>, bool) {
        match *self {
            PolicySpec::Learned { model, exec } => (Controller::Learned { model, sample: false }, Executor::Learned(exec), false),
            PolicySpec::Baseline { kind, exec } => (Controller::Baseline(kind), Executor::Learned(exec), false),
            PolicySpec::Oracle => (Controller::Baseline(BaselineKind::NoAssist), Executor::Oracle, false),
            PolicySpec::Skyline { model, exec } => (Controller::Learned { model, sample: false }, Executor::Learned(exec), true),
        }
    }
}

/// A named set of tasks evaluated together.
#[derive(Debug, Clone, Copy)]
pub struct Condition<'a> {
    pub name: &'a str,
    pub tasks: &'a [Task],
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalTrace {
    pub condition: String,
    pub run_seed: u64,
    pub trace: EpisodeTrace,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOutput {
    /// One report per run seed, in seed order.
    pub per_seed: Vec<MetricsReport>,
    pub traces: Vec<EvalTrace>,
}

impl EvalOutput {
    pub fn pooled(&self) -> MetricsReport {
        let mut out = MetricsReport::new(self.per_seed.first().map_or(0, |r| r.bins));
        for r in &self.per_seed {
            out.merge(r);
        }
        out
    }

    /// Pooled per-episode success indicators of one condition.
    pub fn successes(&self, condition: &str) -> Vec<f64> {
        self.pooled().get(condition).map(|c| c.successes()).unwrap_or_default()
    }
}

fn run_condition(
    env: &IntentionEnv<'_>,
    spec: &PolicySpec<'_>,
    tasks: &[Task],
    run_seed: u64,
    workers: usize,
) -> Result<Vec<EpisodeTrace>> {
    let (controller, executor, skyline) = spec.parts();
    let opts = RolloutOptions { enforce_sub_budget: false, skyline };
    let one = |t: &Task| rollout_seeded(env, t, controller, executor, opts, episode_seed(run_seed, t.id)).map(|r| r.trace);
    if workers <= 1 || tasks.len() < 2 * workers {
        return tasks.iter().map(one).collect();
    }
    let chunk = tasks.len().div_ceil(workers);
    let parts: Vec<Result<Vec<EpisodeTrace>>> = std::thread::scope(|s| {
        let handles: Vec<_> =
            tasks.chunks(chunk).map(|c| s.spawn(move || c.iter().map(one).collect::<Result<Vec<_>>>())).collect();
        handles.into_iter().map(|h| h.join().expect("evaluation worker panicked")).collect()
    });
    let mut out = Vec::with_capacity(tasks.len());
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// Runs every task of every condition once per seed in evaluation mode
/// (argmax intentions, no subgoal budget). Episodes are seeded from the run
/// seed and the task id, so results do not depend on `workers`.
pub fn run_eval(
    env: &IntentionEnv<'_>,
    spec: &PolicySpec<'_>,
    conditions: &[Condition<'_>],
    seeds: &[u64],
    bins: usize,
    workers: usize,
) -> Result<EvalOutput> {
    if seeds.is_empty() {
        return Err(Error::Config("evaluation needs at least one seed".into()));
    }
    let mut per_seed = Vec::with_capacity(seeds.len());
    let mut traces = Vec::new();
    for &seed in seeds {
        let mut report = MetricsReport::new(bins);
        for c in conditions {
            if c.tasks.is_empty() {
                return Err(Error::Missing(format!("tasks for condition {}", c.name)));
            }
            for tr in run_condition(env, spec, c.tasks, seed, workers)? {
                report.add(c.name, &tr);
                traces.push(EvalTrace { condition: c.name.to_string(), run_seed: seed, trace: tr });
            }
        }
        per_seed.push(report);
    }
    Ok(EvalOutput { per_seed, traces })
}

/// Evaluation with oracle-executed subgoal legs.
pub fn run_skyline(
    env: &IntentionEnv<'_>,
    model: &IntentionModel,
    exec: &ExecPolicy,
    conditions: &[Condition<'_>],
    seeds: &[u64],
    bins: usize,
    workers: usize,
) -> Result<EvalOutput> {
    run_eval(env, &PolicySpec::Skyline { model, exec }, conditions, seeds, bins, workers)
}
