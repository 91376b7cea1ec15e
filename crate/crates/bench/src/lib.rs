//! Shared fixtures for the benchmarks.

use intent_core::harness::Corpus;
use intent_core::training::{episode_seed, rollout_seeded, Controller, Executor, Rollout, RolloutOptions};
use intent_core::{ExecPolicy, IntentionEnv, IntentionModel, RunConfig, SplitName};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A small but complete corpus with jittered (untrained) policies.
pub struct Fixture {
    pub cfg: RunConfig,
    pub corpus: Corpus,
    pub exec: ExecPolicy,
    pub model: IntentionModel,
}

impl Fixture {
    pub fn new() -> Fixture {
        let mut cfg = RunConfig::desk();
        cfg.split.pretrain_tasks = 200;
        cfg.split.train_tasks = 200;
        cfg.split.eval_tasks = 50;
        let corpus = Corpus::build(&cfg).expect("desk corpus builds");
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut exec = ExecPolicy::new(cfg.exec, &mut rng);
        exec.params.data.iter_mut().for_each(|x| *x += rng.random_range(-0.05..0.05));
        let model = IntentionModel::new(cfg.intent, &mut rng);
        Fixture { cfg, corpus, exec, model }
    }

    pub fn env(&self) -> IntentionEnv<'_> {
        IntentionEnv::new(&self.corpus.worlds, self.cfg.env.clone()).expect("valid env config")
    }

    /// Sampled training rollouts of the intention model.
    pub fn rollouts(&self, n: usize) -> Vec<Rollout> {
        let env = self.env();
        self.corpus.splits.get(SplitName::Train)[..n]
            .iter()
            .map(|t| {
                rollout_seeded(
                    &env,
                    t,
                    Controller::Learned { model: &self.model, sample: true },
                    Executor::Learned(&self.exec),
                    RolloutOptions { enforce_sub_budget: true, skyline: false },
                    episode_seed(3, t.id),
                )
                .expect("rollout succeeds")
            })
            .collect()
    }
}

impl Default for Fixture {
    fn default() -> Self {
        Fixture::new()
    }
}
