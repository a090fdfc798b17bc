//! Rollout collection, advantage estimation, and clipped policy updates.

pub mod buffer;
pub mod config;
pub mod ppo;
pub mod trainer;

pub use buffer::{compute_gae, RolloutBuffer, Stream, Transition};
pub use config::{CurriculumConfig, StagePatch, TrainConfig};
pub use ppo::{ppo_graph, ppo_losses, LossStats, LossVars, Minibatch, PpoConfig};
pub use trainer::{load_adam, save_adam, IterationStats, TrainOutcome, Trainer};
