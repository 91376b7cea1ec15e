//! Pre-training of the execution policy, actor-critic training of the
//! intention policy, the rollout driver and gradient verification.

pub mod a2c;
pub mod dagger;
pub mod gradcheck;
pub mod rollout;
pub mod samplers;

pub use a2c::{a2c_loss_grad, a2c_loss_grad_with, a2c_update, critic_values, cost_to_go, A2CConfig, A2CStats, IntentTrainer, LossWeights, TrainOutput, TrainRecord};
pub use dagger::{
    batch_loss_grad, collect_trajectory, dagger_pretrain, exec_success, trajectory_loss, ExecTrajectory,
    PretrainConfig, PretrainRecord, PretrainResult, RolloutMode,
};
pub use gradcheck::{grad_check, grad_check_at, verify_gradients, GradReport};
pub use rollout::{episode_seed, rollout, rollout_seeded, ActorStep, Controller, Executor, Rollout, RolloutOptions};
pub use samplers::{drop_features, sample_goal_branch, sample_goal_desc, GoalBranch};

#[cfg(test)]
mod tests;
