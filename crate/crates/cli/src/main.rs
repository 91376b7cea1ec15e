use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use intent_core::harness::{
    cost_sweep, csv_rows, eval_variant, mean_counts, pretrain_critic, pretrain_exec, stack_depth_study, stage_rng,
    study_csv, traces_from_str, traces_to_string, train_intention_from, tune_budget, Corpus, EvalOutput, Stage,
    Variant, CSV_HEADER,
};
use intent_core::policy::BudgetX;
use intent_core::training::verify_gradients;
use intent_core::world::io::worlds_to_string;
use intent_core::world::tasks::{split_meta_to_string, splits_to_string};
use intent_core::world::FrequencyTable;
use intent_core::{BaselineKind, ExecPolicy, IntentionEnv, IntentionModel, PolicySpec, RunConfig, SplitName};

const WORLDS_FILE: &str = "worlds.jsonl";
const TASKS_FILE: &str = "tasks.jsonl";
const SPLITS_FILE: &str = "splits.json";
const FREQ_FILE: &str = "frequency.txt";
const EXEC_FILE: &str = "exec.ckpt";
const CRITIC_FILE: &str = "critic.ckpt";

#[derive(Parser)]
#[command(name = "intent", version, about = "Assisted navigation with a goal-stack intention policy")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML run config; defaults to the desk preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config's run seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output root.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Read worlds and splits from this directory instead of regenerating them.
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct ExecArg {
    /// Execution policy checkpoint; defaults to `<out>/exec.ckpt`.
    #[arg(long)]
    exec: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum StageArg {
    Val,
    Test,
}

impl From<StageArg> for Stage {
    fn from(s: StageArg) -> Stage {
        match s {
            StageArg::Val => Stage::Val,
            StageArg::Test => Stage::Test,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate the world collection.
    GenWorld {
        #[command(flatten)]
        common: Common,
    },
    /// Generate the task splits and the description frequency table.
    MakeSplits {
        #[command(flatten)]
        common: Common,
    },
    /// Pre-train the execution policy.
    Pretrain {
        #[command(flatten)]
        common: Common,
    },
    /// Pre-train the intention critic under the frozen initial actor.
    PretrainCritic {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        exec: ExecArg,
        #[arg(long, default_value = "learned")]
        variant: String,
    },
    /// Train an intention policy variant.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        exec: ExecArg,
        /// learned, uncooperative, skyline, stack-<L> or cost-<c>.
        #[arg(long, default_value = "learned")]
        variant: String,
        /// Start from this model (e.g. a pretrain-critic output) and skip critic pre-training.
        #[arg(long)]
        init: Option<PathBuf>,
    },
    /// Evaluate a policy on the three conditions of a stage.
    Eval {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        exec: ExecArg,
        /// learned, skyline, oracle or a rule-based baseline name.
        #[arg(long, default_value = "learned")]
        policy: String,
        /// Intention checkpoint; defaults to `<out>/intent-<variant>.ckpt`.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value = "learned")]
        variant: String,
        #[arg(long, value_enum, default_value = "test")]
        stage: StageArg,
    },
    /// Evaluate the rule-based baselines; budget-matched budgets are tuned on validation.
    Baseline {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        exec: ExecArg,
        /// Learned model whose action counts the budget-matched baseline reproduces.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Train the skyline variant and evaluate it with oracle subgoal legs.
    Skyline {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        exec: ExecArg,
    },
    /// Train and evaluate one policy per uniform request cost.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        exec: ExecArg,
    },
    /// Train and evaluate one policy per goal-stack size.
    StackStudy {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        exec: ExecArg,
    },
    /// Print a trace file, or record and print traces of a policy on one split.
    TraceDump {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        exec: ExecArg,
        /// Existing trace file to print.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value = "oracle")]
        policy: String,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value = "test_unseen_str")]
        split: String,
        #[arg(long, default_value_t = 5)]
        count: usize,
    },
    /// Finite-difference check of both training losses.
    GradCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 64)]
        probes: usize,
    },
}

struct Ctx {
    cfg: RunConfig,
    out: PathBuf,
    data: Option<PathBuf>,
}

impl Ctx {
    fn new(c: &Common) -> Result<Ctx> {
        let mut cfg = match &c.config {
            Some(p) => RunConfig::from_toml(&read(p)?)?,
            None => RunConfig::desk(),
        };
        if let Some(s) = c.seed {
            cfg.seed = s;
        }
        cfg.validate()?;
        std::fs::create_dir_all(&c.out).with_context(|| format!("creating {}", c.out.display()))?;
        Ok(Ctx { cfg, out: c.out.clone(), data: c.data.clone() })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn write(&self, name: &str, text: &str) -> Result<()> {
        let p = self.path(name);
        std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?;
        info!("wrote {}", p.display());
        Ok(())
    }

    fn corpus(&self) -> Result<Corpus> {
        match &self.data {
            Some(d) => Ok(Corpus::load(
                &self.cfg,
                &read(&d.join(WORLDS_FILE))?,
                &read(&d.join(TASKS_FILE))?,
                &read(&d.join(SPLITS_FILE))?,
            )?),
            None => Ok(Corpus::build(&self.cfg)?),
        }
    }

    fn exec(&self, a: &ExecArg) -> Result<ExecPolicy> {
        let p = a.exec.clone().unwrap_or_else(|| self.path(EXEC_FILE));
        let text = read(&p).context("execution policy checkpoint missing; run `intent pretrain` first")?;
        Ok(ExecPolicy::from_checkpoint(&text)?)
    }

    fn model(&self, p: Option<&PathBuf>, variant: &str) -> Result<IntentionModel> {
        let p = p.cloned().unwrap_or_else(|| self.path(&model_file(variant)));
        let text = read(&p).context("intention checkpoint missing; run `intent train` first")?;
        Ok(IntentionModel::from_checkpoint(&text)?)
    }

    fn metrics_csv(&self, rows: &[(String, &EvalOutput)]) -> String {
        let mut rng = stage_rng(self.cfg.seed, "bootstrap");
        let mut csv = format!("{CSV_HEADER}\n");
        for (label, out) in rows {
            csv.push_str(&csv_rows(label, &out.per_seed, &mut rng));
        }
        csv
    }
}

fn read(p: &Path) -> Result<String> {
    std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))
}

fn model_file(variant: &str) -> String {
    format!("intent-{variant}.ckpt")
}

fn variant(cfg: &RunConfig, name: &str) -> Result<Variant> {
    Ok(match name {
        "learned" => Variant::standard(cfg),
        "uncooperative" => Variant::uncooperative(cfg),
        "skyline" => Variant::skyline(cfg),
        _ => {
            if let Some(l) = name.strip_prefix("stack-") {
                Variant::stack_size(cfg, l.parse().with_context(|| format!("bad stack size in {name}"))?)
            } else if let Some(c) = name.strip_prefix("cost-") {
                Variant::cost(cfg, c.parse().with_context(|| format!("bad cost in {name}"))?)
            } else {
                bail!("unknown variant {name}")
            }
        }
    })
}

fn jsonl<T: serde::Serialize>(records: &[T]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

fn print_summary(label: &str, out: &EvalOutput) {
    let pooled = out.pooled();
    for (cond, s) in &pooled.conditions {
        println!("{label} {cond} success {:.4} episodes {}", s.success_rate(), s.len());
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::GenWorld { common } => {
            let ctx = Ctx::new(&common)?;
            let worlds = intent_core::world::generate_collection(ctx.cfg.worlds.count, ctx.cfg.seed, &ctx.cfg.worlds.gen)?;
            ctx.write(WORLDS_FILE, &worlds_to_string(&worlds))?;
            println!("{} worlds", worlds.len());
        }
        Command::MakeSplits { common } => {
            let ctx = Ctx::new(&common)?;
            let corpus = ctx.corpus()?;
            ctx.write(WORLDS_FILE, &worlds_to_string(corpus.worlds.worlds()))?;
            ctx.write(TASKS_FILE, &splits_to_string(&corpus.splits))?;
            ctx.write(SPLITS_FILE, &split_meta_to_string(&corpus.splits))?;
            ctx.write(FREQ_FILE, &FrequencyTable::from_worlds(corpus.worlds.worlds()).to_text())?;
            for (name, tasks) in &corpus.splits.splits {
                println!("{name} {}", tasks.len());
            }
        }
        Command::Pretrain { common } => {
            let ctx = Ctx::new(&common)?;
            let corpus = ctx.corpus()?;
            let r = pretrain_exec(&ctx.cfg, &corpus)?;
            ctx.write(EXEC_FILE, &r.policy.to_checkpoint())?;
            ctx.write("pretrain_log.jsonl", &jsonl(&r.log)?)?;
            println!("best validation success {:.4}", r.best_val_success);
        }
        Command::PretrainCritic { common, exec, variant: v } => {
            let ctx = Ctx::new(&common)?;
            let corpus = ctx.corpus()?;
            let exec = ctx.exec(&exec)?;
            let (model, losses) = pretrain_critic(&ctx.cfg, &corpus, &exec, &variant(&ctx.cfg, &v)?)?;
            ctx.write(CRITIC_FILE, &model.to_checkpoint())?;
            ctx.write("critic_log.jsonl", &jsonl(&losses)?)?;
            println!("critic loss {:.4} -> {:.4}", losses.first().unwrap_or(&f64::NAN), losses.last().unwrap_or(&f64::NAN));
        }
        Command::Train { common, exec, variant: v, init } => {
            let ctx = Ctx::new(&common)?;
            let corpus = ctx.corpus()?;
            let exec = ctx.exec(&exec)?;
            let var = variant(&ctx.cfg, &v)?;
            let init = init.map(|p| -> Result<IntentionModel> { Ok(IntentionModel::from_checkpoint(&read(&p)?)?) }).transpose()?;
            let r = train_intention_from(&ctx.cfg, &corpus, &exec, &var, init)?;
            ctx.write(&model_file(&var.name), &r.best.to_checkpoint())?;
            ctx.write(&format!("train-{}.jsonl", var.name), &jsonl(&r.log)?)?;
            println!("best validation success {:.4}", r.best_val_success);
        }
        Command::Eval { common, exec, policy, model, variant: v, stage } => {
            let ctx = Ctx::new(&common)?;
            let corpus = ctx.corpus()?;
            let var = variant(&ctx.cfg, &v)?;
            let out = match policy.as_str() {
                "oracle" => eval_variant(&ctx.cfg, &corpus, &var, &PolicySpec::Oracle, stage.into())?,
                "learned" | "skyline" => {
                    let e = ctx.exec(&exec)?;
                    let m = ctx.model(model.as_ref(), &var.name)?;
                    let spec = if policy == "skyline" {
                        PolicySpec::Skyline { model: &m, exec: &e }
                    } else {
                        PolicySpec::Learned { model: &m, exec: &e }
                    };
                    eval_variant(&ctx.cfg, &corpus, &var, &spec, stage.into())?
                }
                name => {
                    let kind = BaselineKind::parse(name)?;
                    let e = ctx.exec(&exec)?;
                    eval_variant(&ctx.cfg, &corpus, &var, &PolicySpec::Baseline { kind, exec: &e }, stage.into())?
                }
            };
            ctx.write(&format!("eval-{policy}.csv"), &ctx.metrics_csv(&[(policy.clone(), &out)]))?;
            let traces: Vec<_> = out.traces.iter().map(|t| t.trace.clone()).collect();
            ctx.write(&format!("traces-{policy}.txt"), &traces_to_string(&traces))?;
            print_summary(&policy, &out);
        }
        Command::Baseline { common, exec, model } => {
            let ctx = Ctx::new(&common)?;
            let corpus = ctx.corpus()?;
            let e = ctx.exec(&exec)?;
            let var = Variant::standard(&ctx.cfg);
            let mut outs = Vec::new();
            for kind in [BaselineKind::NoAssist, BaselineKind::DenseGoal, BaselineKind::DenseCur, BaselineKind::DenseBoth] {
                let out = eval_variant(&ctx.cfg, &corpus, &var, &PolicySpec::Baseline { kind, exec: &e }, Stage::Test)?;
                print_summary(kind.name(), &out);
                outs.push((kind.name().to_string(), out));
            }
            if let Some(p) = model {
                let m = IntentionModel::from_checkpoint(&read(&p)?)?;
                let env = IntentionEnv::new(&corpus.worlds, var.env.clone())?;
                let val = corpus.conditions(Stage::Val, ctx.cfg.eval.max_tasks);
                let learned = eval_variant(&ctx.cfg, &corpus, &var, &PolicySpec::Learned { model: &m, exec: &e }, Stage::Val)?;
                let target: BudgetX = mean_counts(&learned.pooled());
                let ex = &ctx.cfg.experiments;
                let tuned = tune_budget(&env, &e, &val, target, ex.budget_rounds, ex.budget_tolerance, &ctx.cfg.eval.seeds)?;
                println!("budget-matched target {target:?} budgets {:?} realized {:?}", tuned.budgets, tuned.realized);
                let kind = BaselineKind::BudgetMatched(tuned.budgets);
                let out = eval_variant(&ctx.cfg, &corpus, &var, &PolicySpec::Baseline { kind, exec: &e }, Stage::Test)?;
                print_summary(kind.name(), &out);
                outs.push((kind.name().to_string(), out));
            }
            let rows: Vec<(String, &EvalOutput)> = outs.iter().map(|(l, o)| (l.clone(), o)).collect();
            ctx.write("baselines.csv", &ctx.metrics_csv(&rows))?;
        }
        Command::Skyline { common, exec } => {
            let ctx = Ctx::new(&common)?;
            let corpus = ctx.corpus()?;
            let e = ctx.exec(&exec)?;
            let var = Variant::skyline(&ctx.cfg);
            let r = train_intention_from(&ctx.cfg, &corpus, &e, &var, None)?;
            ctx.write(&model_file(&var.name), &r.best.to_checkpoint())?;
            let sky = eval_variant(&ctx.cfg, &corpus, &var, &PolicySpec::Skyline { model: &r.best, exec: &e }, Stage::Test)?;
            print_summary("skyline", &sky);
            ctx.write("skyline.csv", &ctx.metrics_csv(&[("skyline".into(), &sky)]))?;
        }
        Command::Sweep { common, exec } => {
            let ctx = Ctx::new(&common)?;
            let corpus = ctx.corpus()?;
            let e = ctx.exec(&exec)?;
            let rows = cost_sweep(&ctx.cfg, &corpus, &e, &ctx.cfg.experiments.sweep_costs)?;
            let csv = study_csv("cost", &rows);
            print!("{csv}");
            ctx.write("sweep.csv", &csv)?;
        }
        Command::StackStudy { common, exec } => {
            let ctx = Ctx::new(&common)?;
            let corpus = ctx.corpus()?;
            let e = ctx.exec(&exec)?;
            let rows = stack_depth_study(&ctx.cfg, &corpus, &e, &ctx.cfg.experiments.stack_sizes)?;
            let csv = study_csv("stack_size", &rows);
            print!("{csv}");
            ctx.write("stack.csv", &csv)?;
        }
        Command::TraceDump { common, exec, input, policy, model, split, count } => {
            let ctx = Ctx::new(&common)?;
            let traces = match input {
                Some(p) => traces_from_str(&read(&p)?)?,
                None => {
                    let corpus = ctx.corpus()?;
                    let split = SplitName::parse(&split)?;
                    let tasks = corpus.splits.get(split);
                    let tasks = &tasks[..count.min(tasks.len())];
                    let cond = intent_core::harness::Condition { name: split.as_str(), tasks };
                    let env = IntentionEnv::new(&corpus.worlds, ctx.cfg.env.clone())?;
                    let seeds = [ctx.cfg.eval.seeds[0]];
                    let out = match policy.as_str() {
                        "oracle" => intent_core::harness::run_eval(&env, &PolicySpec::Oracle, &[cond], &seeds, 1, 1)?,
                        "learned" => {
                            let e = ctx.exec(&exec)?;
                            let m = ctx.model(model.as_ref(), "learned")?;
                            intent_core::harness::run_eval(&env, &PolicySpec::Learned { model: &m, exec: &e }, &[cond], &seeds, 1, 1)?
                        }
                        name => {
                            let kind = BaselineKind::parse(name)?;
                            let e = ctx.exec(&exec)?;
                            intent_core::harness::run_eval(&env, &PolicySpec::Baseline { kind, exec: &e }, &[cond], &seeds, 1, 1)?
                        }
                    };
                    let traces: Vec<_> = out.traces.into_iter().map(|t| t.trace).collect();
                    ctx.write(&format!("traces-{}.txt", split.as_str()), &traces_to_string(&traces))?;
                    traces
                }
            };
            for tr in &traces {
                let actions: Vec<&str> = tr.steps.iter().map(|s| s.action.as_str()).collect();
                println!(
                    "task {} world {} {} -> {} final {} success {} cost {:.3}: {}",
                    tr.task_id,
                    tr.world.0,
                    tr.start,
                    tr.goal,
                    tr.final_node,
                    tr.success,
                    tr.total_raw,
                    actions.join(" ")
                );
            }
        }
        Command::GradCheck { common, probes } => {
            let ctx = Ctx::new(&common)?;
            let r = verify_gradients(ctx.cfg.seed, probes.max(1))?;
            println!("exec max relative error {:.3e}", r.exec);
            println!("a2c max relative error {:.3e}", r.a2c);
            println!("max relative error {:.3e} over {} probes per loss", r.max_error(), r.probes);
            if !(r.max_error() <= 1e-4) {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::try_parse().unwrap_or_else(|e| e.exit());
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
