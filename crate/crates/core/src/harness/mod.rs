//! Evaluation, metrics, experiment tables and trace persistence.

pub mod eval;
pub mod experiments;
pub mod metrics;
pub mod trace;

pub use eval::{run_eval, run_skyline, Condition, EvalOutput, EvalTrace, PolicySpec};
pub use experiments::{
    cost_sweep, eval_variant, mean_counts, pretrain_critic, pretrain_exec, stack_depth_study, stage_rng, stage_seed, study_csv,
    train_intention, train_intention_from, tune_budget, BudgetTuning, Corpus, Stage, StudyRow, Variant, CONDITIONS, STUDY_HEADER,
};
pub use metrics::{
    action_over_time, bootstrap_diff_ci, bootstrap_mean_ci, csv_rows, normalize_bins, ConditionStats,
    EpisodeSummary, MetricsReport, BOOTSTRAP_RESAMPLES, CSV_HEADER,
};
pub use trace::{traces_from_str, traces_to_string, EpisodeTrace, TRACE_SCHEMA};

#[cfg(test)]
mod tests;
