//! The experiment pipeline: corpus construction, execution pre-training,
//! intention training variants, baseline tuning and the study tables.

use std::fmt::Write as _;

use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::eval::{run_eval, Condition, EvalOutput, PolicySpec};
use super::metrics::MetricsReport;
use crate::config::RunConfig;
use crate::env::{CostConfig, EnvConfig, IntentAction, IntentionEnv};
use crate::error::Result;
use crate::policy::{BaselineKind, BudgetX, ExecPolicy, IntentionModel};
use crate::training::{dagger_pretrain, Executor, IntentTrainer, PretrainResult, RolloutOptions, TrainOutput};
use crate::world::io::worlds_from_str;
use crate::world::tasks::splits_from_str;
use crate::world::{generate_collection, make_splits, DatasetSplits, FrequencyTable, Perception, SplitName, WorldSet};

/// Seed of one pipeline stage, derived from the run seed and a stage tag.
pub fn stage_seed(seed: u64, tag: &str) -> u64 {
    // FNV-1a over the tag, mixed with the run seed
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h ^ seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

pub fn stage_rng(seed: u64, tag: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stage_seed(seed, tag))
}

pub struct Corpus {
    pub worlds: WorldSet,
    pub splits: DatasetSplits,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Val,
    Test,
}

pub const CONDITIONS: [&str; 3] = ["unseen_str", "unseen_obj", "unseen_env"];

impl Stage {
    pub fn splits(self) -> [SplitName; 3] {
        match self {
            Stage::Val => [SplitName::ValUnseenStr, SplitName::ValUnseenObj, SplitName::ValUnseenEnv],
            Stage::Test => [SplitName::TestUnseenStr, SplitName::TestUnseenObj, SplitName::TestUnseenEnv],
        }
    }
}

impl Corpus {
    /// Worlds from the run seed, frequency table over the whole collection,
    /// then the splits.
    pub fn build(cfg: &RunConfig) -> Result<Corpus> {
        let worlds = generate_collection(cfg.worlds.count, cfg.seed, &cfg.worlds.gen)?;
        Corpus::from_worlds(cfg, worlds)
    }

    pub fn from_worlds(cfg: &RunConfig, worlds: Vec<crate::world::WorldGraph>) -> Result<Corpus> {
        let table = FrequencyTable::from_worlds(&worlds);
        let perception = Perception::new(table, cfg.split.top_k);
        let splits = make_splits(&worlds, &perception, &cfg.split, &mut stage_rng(cfg.seed, "splits"))?;
        Ok(Corpus { worlds: WorldSet::new(worlds, perception)?, splits })
    }

    /// Corpus from a world file and a split file pair.
    pub fn load(cfg: &RunConfig, worlds: &str, tasks: &str, meta: &str) -> Result<Corpus> {
        let worlds = worlds_from_str(worlds)?;
        let perception = Perception::new(FrequencyTable::from_worlds(&worlds), cfg.split.top_k);
        let splits = splits_from_str(tasks, meta, &worlds, &perception)?;
        Ok(Corpus { worlds: WorldSet::new(worlds, perception)?, splits })
    }

    /// The three evaluation conditions of a stage, truncated to `max` tasks each.
    pub fn conditions(&self, stage: Stage, max: Option<usize>) -> Vec<Condition<'_>> {
        CONDITIONS
            .iter()
            .zip(stage.splits())
            .map(|(name, split)| {
                let tasks = self.splits.get(split);
                Condition { name, tasks: &tasks[..max.unwrap_or(usize::MAX).min(tasks.len())] }
            })
            .collect()
    }
}

pub fn pretrain_exec(cfg: &RunConfig, corpus: &Corpus) -> Result<PretrainResult> {
    let mut rng = stage_rng(cfg.seed, "pretrain");
    let policy = ExecPolicy::new(cfg.exec, &mut rng);
    dagger_pretrain(
        &corpus.worlds,
        corpus.splits.get(SplitName::Pretrain),
        corpus.splits.get(SplitName::PretrainVal),
        policy,
        &cfg.pretrain,
        &mut rng,
    )
}

/// An intention training setting.
#[derive(Debug, Clone, PartialEq)]
pub struct Variant {
    pub name: String,
    pub env: EnvConfig,
    pub skyline: bool,
}

impl Variant {
    pub fn standard(cfg: &RunConfig) -> Variant {
        Variant { name: "learned".into(), env: cfg.env.clone(), skyline: false }
    }

    pub fn uncooperative(cfg: &RunConfig) -> Variant {
        let mut env = cfg.env.clone();
        env.assistant.cooperative = false;
        Variant { name: "uncooperative".into(), env, skyline: false }
    }

    pub fn skyline(cfg: &RunConfig) -> Variant {
        Variant { name: "skyline".into(), env: cfg.env.clone(), skyline: true }
    }

    pub fn stack_size(cfg: &RunConfig, l: usize) -> Variant {
        let mut env = cfg.env.clone();
        env.stack_size = l;
        Variant { name: format!("stack-{l}"), env, skyline: false }
    }

    pub fn cost(cfg: &RunConfig, c: f64) -> Variant {
        let mut env = cfg.env.clone();
        env.cost = CostConfig { horizon: env.cost.horizon, shaping: env.cost.shaping, ..CostConfig::uniform(c) };
        Variant { name: format!("cost-{c}"), env, skyline: false }
    }
}

fn trainer<'a>(cfg: &'a RunConfig, env: &'a IntentionEnv<'a>, exec: &'a ExecPolicy, variant: &Variant) -> IntentTrainer<'a> {
    IntentTrainer {
        env,
        executor: Executor::Learned(exec),
        opts: RolloutOptions { enforce_sub_budget: true, skyline: variant.skyline },
        cfg: &cfg.a2c,
    }
}

/// Critic pre-training plus actor-critic on the train split, selecting on
/// the validation conditions. The uncooperative variant trains against the
/// uncooperative assistant but, like all others, is selected and evaluated
/// with its own environment.
pub fn train_intention(
    cfg: &RunConfig,
    corpus: &Corpus,
    exec: &ExecPolicy,
    variant: &Variant,
) -> Result<TrainOutput> {
    train_intention_from(cfg, corpus, exec, variant, None)
}

/// As [`train_intention`]; a given initial model skips critic pre-training.
pub fn train_intention_from(
    cfg: &RunConfig,
    corpus: &Corpus,
    exec: &ExecPolicy,
    variant: &Variant,
    init: Option<IntentionModel>,
) -> Result<TrainOutput> {
    let env = IntentionEnv::new(&corpus.worlds, variant.env.clone())?;
    let mut a2c = cfg.a2c.clone();
    let mut rng = stage_rng(cfg.seed, &format!("a2c/{}", variant.name));
    let model = match init {
        Some(m) => {
            a2c.critic_pretrain_iterations = 0;
            m
        }
        None => IntentionModel::new(cfg.intent, &mut rng),
    };
    let cfg = RunConfig { a2c, ..cfg.clone() };
    let val = corpus.conditions(Stage::Val, Some(cfg.a2c.val_tasks));
    let val: Vec<&[crate::world::Task]> = val.iter().map(|c| c.tasks).collect();
    info!("training intention variant {}", variant.name);
    trainer(&cfg, &env, exec, variant).train(model, corpus.splits.get(SplitName::Train), &val, &mut rng)
}

/// A fresh intention model with a pre-trained critic, plus the critic losses.
pub fn pretrain_critic(cfg: &RunConfig, corpus: &Corpus, exec: &ExecPolicy, variant: &Variant) -> Result<(IntentionModel, Vec<f64>)> {
    let env = IntentionEnv::new(&corpus.worlds, variant.env.clone())?;
    let mut rng = stage_rng(cfg.seed, &format!("a2c/{}", variant.name));
    let mut model = IntentionModel::new(cfg.intent, &mut rng);
    let losses = trainer(cfg, &env, exec, variant).pretrain_critic(&mut model, corpus.splits.get(SplitName::Train), &mut rng)?;
    Ok((model, losses))
}

pub fn eval_variant(
    cfg: &RunConfig,
    corpus: &Corpus,
    variant: &Variant,
    spec: &PolicySpec<'_>,
    stage: Stage,
) -> Result<EvalOutput> {
    let env = IntentionEnv::new(&corpus.worlds, variant.env.clone())?;
    let conds = corpus.conditions(stage, cfg.eval.max_tasks);
    run_eval(&env, spec, &conds, &cfg.eval.seeds, cfg.eval.bins, cfg.eval.workers)
}

pub fn mean_counts(report: &MetricsReport) -> BudgetX {
    let mut x = BudgetX { cur: 0.0, goal: 0.0, sub: 0.0, do_: 0.0 };
    let mut n = 0usize;
    for c in report.conditions.values() {
        for e in &c.episodes {
            for a in [IntentAction::Cur, IntentAction::Goal, IntentAction::Sub, IntentAction::Do] {
                x.set(a, x.get(a) + e.counts[a.index()] as f64);
            }
            n += 1;
        }
    }
    if n > 0 {
        for a in [IntentAction::Cur, IntentAction::Goal, IntentAction::Sub, IntentAction::Do] {
            x.set(a, x.get(a) / n as f64);
        }
    }
    x
}

#[derive(Debug, Clone, PartialEq)]
pub struct BudgetTuning {
    pub budgets: BudgetX,
    pub realized: BudgetX,
    pub rounds: usize,
    pub converged: bool,
}

/// Fixed-point search for budgets whose realized mean action counts on the
/// given conditions match `target` within `tolerance`: each round raises
/// every budget by its shortfall.
pub fn tune_budget(
    env: &IntentionEnv<'_>,
    exec: &ExecPolicy,
    conditions: &[Condition<'_>],
    target: BudgetX,
    rounds: usize,
    tolerance: f64,
    seeds: &[u64],
) -> Result<BudgetTuning> {
    let kinds = [IntentAction::Cur, IntentAction::Goal, IntentAction::Sub, IntentAction::Do];
    let mut x = target;
    let mut best: Option<(f64, BudgetTuning)> = None;
    for round in 1..=rounds.max(1) {
        let out = run_eval(env, &PolicySpec::Baseline { kind: BaselineKind::BudgetMatched(x), exec }, conditions, seeds, 1, 1)?;
        let realized = mean_counts(&out.pooled());
        let gap = kinds.iter().map(|a| (target.get(*a) - realized.get(*a)).abs()).fold(0.0, f64::max);
        let converged = gap <= tolerance;
        if best.as_ref().is_none_or(|(g, _)| gap < *g) {
            best = Some((gap, BudgetTuning { budgets: x, realized, rounds: round, converged }));
        }
        if converged {
            break;
        }
        for a in kinds {
            x.set(a, (x.get(a) + target.get(a) - realized.get(a)).max(0.0));
        }
    }
    Ok(best.expect("at least one round").1)
}

/// One row group of a study table.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub value: f64,
    pub output: EvalOutput,
}

pub const STUDY_HEADER: &str = "param,value,condition,success,mean_cur,mean_goal,mean_sub,mean_do,mean_done,mean_cost";

pub fn study_csv(param: &str, rows: &[StudyRow]) -> String {
    let mut out = String::from(STUDY_HEADER);
    out.push('\n');
    for r in rows {
        for (cond, s) in &r.output.pooled().conditions {
            let _ = writeln!(
                out,
                "{param},{},{cond},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4}",
                r.value,
                s.success_rate(),
                s.mean_count(IntentAction::Cur),
                s.mean_count(IntentAction::Goal),
                s.mean_count(IntentAction::Sub),
                s.mean_count(IntentAction::Do),
                s.mean_count(IntentAction::Done),
                s.mean_cost(),
            );
        }
    }
    out
}

/// One training run and test evaluation per uniform request cost.
pub fn cost_sweep(cfg: &RunConfig, corpus: &Corpus, exec: &ExecPolicy, costs: &[f64]) -> Result<Vec<StudyRow>> {
    costs
        .iter()
        .map(|&c| {
            let v = Variant::cost(cfg, c);
            let model = train_intention(cfg, corpus, exec, &v)?.best;
            let output = eval_variant(cfg, corpus, &v, &PolicySpec::Learned { model: &model, exec }, Stage::Test)?;
            Ok(StudyRow { value: c, output })
        })
        .collect()
}

/// One training run and test evaluation per stack size.
pub fn stack_depth_study(cfg: &RunConfig, corpus: &Corpus, exec: &ExecPolicy, sizes: &[usize]) -> Result<Vec<StudyRow>> {
    sizes
        .iter()
        .map(|&l| {
            let v = Variant::stack_size(cfg, l);
            let model = train_intention(cfg, corpus, exec, &v)?.best;
            let output = eval_variant(cfg, corpus, &v, &PolicySpec::Learned { model: &model, exec }, Stage::Test)?;
            Ok(StudyRow { value: l as f64, output })
        })
        .collect()
}
