//! Aggregated evaluation metrics.
//!
//! Per-episode outcomes are kept in evaluation order so that merging shards
//! in order reproduces a single pass exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::trace::EpisodeTrace;
use crate::env::IntentAction;

/// Outcome of one episode, reduced to what the report needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub success: bool,
    pub counts: [usize; 5],
    pub steps: usize,
    pub total_raw: f64,
}

impl EpisodeSummary {
    pub fn from_trace(tr: &EpisodeTrace) -> Self {
        let mut counts = [0; 5];
        for s in &tr.steps {
            counts[s.action.index()] += 1;
        }
        EpisodeSummary { success: tr.success, counts, steps: tr.len(), total_raw: tr.total_raw }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConditionStats {
    pub episodes: Vec<EpisodeSummary>,
    /// `bins × 5` action counts over normalized episode progress.
    pub time_bins: Vec<[usize; 5]>,
}

impl ConditionStats {
    pub fn new(bins: usize) -> Self {
        ConditionStats { episodes: Vec::new(), time_bins: vec![[0; 5]; bins] }
    }

    pub fn add(&mut self, tr: &EpisodeTrace) {
        self.episodes.push(EpisodeSummary::from_trace(tr));
        add_to_bins(&mut self.time_bins, tr);
    }

    pub fn merge(&mut self, other: &ConditionStats) {
        self.episodes.extend_from_slice(&other.episodes);
        if self.time_bins.is_empty() {
            self.time_bins = other.time_bins.clone();
        } else {
            assert_eq!(self.time_bins.len(), other.time_bins.len(), "bin counts differ");
            for (a, b) in self.time_bins.iter_mut().zip(&other.time_bins) {
                for k in 0..5 {
                    a[k] += b[k];
                }
            }
        }
    }

    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    pub fn success_rate(&self) -> f64 {
        mean(self.episodes.iter().map(|e| e.success as u8 as f64))
    }

    pub fn mean_count(&self, a: IntentAction) -> f64 {
        mean(self.episodes.iter().map(|e| e.counts[a.index()] as f64))
    }

    pub fn mean_steps(&self) -> f64 {
        mean(self.episodes.iter().map(|e| e.steps as f64))
    }

    pub fn mean_cost(&self) -> f64 {
        mean(self.episodes.iter().map(|e| e.total_raw))
    }

    pub fn successes(&self) -> Vec<f64> {
        self.episodes.iter().map(|e| e.success as u8 as f64).collect()
    }
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

fn add_to_bins(bins: &mut [[usize; 5]], tr: &EpisodeTrace) {
    let n = tr.len();
    if bins.is_empty() {
        return;
    }
    for (i, s) in tr.steps.iter().enumerate() {
        let b = (i * bins.len() / n).min(bins.len() - 1);
        bins[b][s.action.index()] += 1;
    }
}

/// Counts of each action kind per progress bin; step `i` of an episode of
/// length `n` goes to bin `⌊i·bins/n⌋`.
pub fn action_over_time(traces: &[EpisodeTrace], bins: usize) -> Vec<[usize; 5]> {
    let mut out = vec![[0; 5]; bins];
    for tr in traces {
        add_to_bins(&mut out, tr);
    }
    out
}

/// Each kind's distribution over bins (columns sum to one, or zero if the kind never occurs).
pub fn normalize_bins(bins: &[[usize; 5]]) -> Vec<[f64; 5]> {
    let mut totals = [0usize; 5];
    for b in bins {
        for k in 0..5 {
            totals[k] += b[k];
        }
    }
    bins.iter()
        .map(|b| std::array::from_fn(|k| if totals[k] == 0 { 0.0 } else { b[k] as f64 / totals[k] as f64 }))
        .collect()
}

/// Metrics keyed by condition name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub bins: usize,
    pub conditions: BTreeMap<String, ConditionStats>,
}

impl MetricsReport {
    pub fn new(bins: usize) -> Self {
        MetricsReport { bins, conditions: BTreeMap::new() }
    }

    pub fn add(&mut self, condition: &str, tr: &EpisodeTrace) {
        self.conditions.entry(condition.to_string()).or_insert_with(|| ConditionStats::new(self.bins)).add(tr);
    }

    pub fn merge(&mut self, other: &MetricsReport) {
        assert_eq!(self.bins, other.bins, "bin counts differ");
        for (k, v) in &other.conditions {
            self.conditions.entry(k.clone()).or_insert_with(|| ConditionStats::new(self.bins)).merge(v);
        }
    }

    pub fn get(&self, condition: &str) -> Option<&ConditionStats> {
        self.conditions.get(condition)
    }

    pub fn success_rate(&self, condition: &str) -> f64 {
        self.get(condition).map_or(0.0, ConditionStats::success_rate)
    }
}

pub const CSV_HEADER: &str = "label,condition,seeds,episodes,success,success_min,success_max,ci_lo,ci_hi,\
mean_cur,mean_goal,mean_sub,mean_do,mean_done,mean_steps,mean_cost";

/// One CSV row per condition. `per_seed` holds the report of each
/// evaluation seed; the pooled figures are over all of them.
pub fn csv_rows<R: Rng>(label: &str, per_seed: &[MetricsReport], rng: &mut R) -> String {
    let mut pooled = MetricsReport::new(per_seed.first().map_or(0, |r| r.bins));
    for r in per_seed {
        pooled.merge(r);
    }
    let mut out = String::new();
    for (cond, stats) in &pooled.conditions {
        let rates: Vec<f64> = per_seed.iter().filter_map(|r| r.get(cond)).map(ConditionStats::success_rate).collect();
        let lo = rates.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = rates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (ci_lo, ci_hi) = bootstrap_mean_ci(&stats.successes(), BOOTSTRAP_RESAMPLES, 0.95, rng);
        let _ = writeln!(
            out,
            "{label},{cond},{},{},{:.4},{lo:.4},{hi:.4},{ci_lo:.4},{ci_hi:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4}",
            rates.len(),
            stats.len(),
            stats.success_rate(),
            stats.mean_count(IntentAction::Cur),
            stats.mean_count(IntentAction::Goal),
            stats.mean_count(IntentAction::Sub),
            stats.mean_count(IntentAction::Do),
            stats.mean_count(IntentAction::Done),
            stats.mean_steps(),
            stats.mean_cost(),
        );
    }
    out
}

pub const BOOTSTRAP_RESAMPLES: usize = 1000;

fn percentile_interval(mut stats: Vec<f64>, level: f64) -> (f64, f64) {
    if stats.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    stats.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    let idx = |q: f64| ((q * (stats.len() - 1) as f64).round() as usize).min(stats.len() - 1);
    (stats[idx(alpha)], stats[idx(1.0 - alpha)])
}

fn resample_mean<R: Rng>(xs: &[f64], rng: &mut R) -> f64 {
    (0..xs.len()).map(|_| xs[rng.random_range(0..xs.len())]).sum::<f64>() / xs.len() as f64
}

/// Percentile bootstrap interval of the mean.
pub fn bootstrap_mean_ci<R: Rng>(xs: &[f64], resamples: usize, level: f64, rng: &mut R) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    percentile_interval((0..resamples).map(|_| resample_mean(xs, rng)).collect(), level)
}

/// Percentile bootstrap interval of `mean(a) − factor·mean(b)` with the two
/// samples resampled independently.
pub fn bootstrap_diff_ci<R: Rng>(a: &[f64], b: &[f64], factor: f64, resamples: usize, level: f64, rng: &mut R) -> (f64, f64) {
    if a.is_empty() || b.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    percentile_interval((0..resamples).map(|_| resample_mean(a, rng) - factor * resample_mean(b, rng)).collect(), level)
}
