//! Corruption steps, SAM objectives, base optimizers and the training loop.

mod config;
mod corruption;
mod objective;
mod optim;
mod train;

pub use config::{Implementation, SamConfig};
pub use corruption::{ascent_step, ascent_step_raw, project, project_raw, scaled_norm, NormOrder};
pub use objective::{multi_step_objective, sam_objective, single_step_objective, CorruptionState, ObjectiveResult};
pub use optim::{Optimizer, OptimizerConfig};
pub use train::{train, EpochMetrics, Phase, TrainMetrics, TrainOptions};
