//! Run configuration, read from TOML. Every section falls back to its
//! defaults, which form the desk-scale preset.

use serde::{Deserialize, Serialize};

use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::policy::{ExecConfig, IntentConfig};
use crate::training::{A2CConfig, PretrainConfig};
use crate::world::{SplitConfig, WorldGenConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldsConfig {
    pub count: usize,
    pub gen: WorldGenConfig,
}

impl Default for WorldsConfig {
    fn default() -> Self {
        WorldsConfig { count: 72, gen: WorldGenConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub seeds: Vec<u64>,
    /// Progress bins of the action-over-time histogram.
    pub bins: usize,
    /// Evaluate only the first tasks of each condition.
    pub max_tasks: Option<usize>,
    pub workers: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { seeds: vec![1, 2, 3], bins: 5, max_tasks: None, workers: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Uniform request costs of the cost sweep.
    pub sweep_costs: Vec<f64>,
    pub stack_sizes: Vec<usize>,
    /// Fixed-point rounds of the budget-matched baseline tuning.
    pub budget_rounds: usize,
    pub budget_tolerance: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            sweep_costs: vec![0.01, 0.05, 0.1, 0.2, 0.5],
            stack_sizes: vec![1, 2, 3],
            budget_rounds: 8,
            budget_tolerance: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub worlds: WorldsConfig,
    pub split: SplitConfig,
    pub exec: ExecConfig,
    pub pretrain: PretrainConfig,
    pub intent: IntentConfig,
    pub a2c: A2CConfig,
    pub env: EnvConfig,
    pub eval: EvalConfig,
    pub experiments: ExperimentConfig,
}

impl RunConfig {
    pub fn desk() -> Self {
        RunConfig::default()
    }

    /// Learning rates and iteration counts of the full-scale setting.
    pub fn full_scale() -> Self {
        let mut c = RunConfig::default();
        c.pretrain.lr = 1e-4;
        c.pretrain.iterations = 100_000;
        c.a2c.lr = 1e-5;
        c.a2c.iterations = 50_000;
        c.a2c.entropy_weight = 0.001;
        c.a2c.critic_pretrain_iterations = 5_000;
        c.exec.hidden = 256;
        c.intent.belief_dim = 256;
        c.intent.actor_hidden = 512;
        c.intent.critic_hidden = 512;
        c
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(RunConfig::desk()),
            "full" => Ok(RunConfig::full_scale()),
            _ => Err(Error::Config(format!("unknown preset {name}"))),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let c: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.worlds.gen.validate()?;
        if self.worlds.count < self.split.total_worlds() {
            return Err(Error::Config(format!(
                "{} worlds generated, splits need {}",
                self.worlds.count,
                self.split.total_worlds()
            )));
        }
        if self.intent.belief_dim != self.exec.hidden {
            return Err(Error::Config("intention belief width must equal the execution hidden size".into()));
        }
        if self.env.stack_size == 0 {
            return Err(Error::Config("stack size must be positive".into()));
        }
        if self.eval.seeds.is_empty() || self.eval.bins == 0 {
            return Err(Error::Config("evaluation needs seeds and bins".into()));
        }
        self.pretrain.validate()?;
        self.a2c.validate()?;
        self.env.cost.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let c = RunConfig::full_scale();
        assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn partial_file_takes_defaults() {
        let c = RunConfig::from_toml("seed = 9\n[a2c]\niterations = 5\n").unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.a2c.iterations, 5);
        assert_eq!(c.a2c.batch_size, A2CConfig::default().batch_size);
        assert_eq!(c.pretrain, PretrainConfig::default());
    }

    #[test]
    fn mismatched_widths_rejected() {
        assert!(RunConfig::from_toml("[exec]\nhidden = 8\n").is_err());
        assert!(RunConfig::from_toml("[eval]\nseeds = []\n").is_err());
    }
}
