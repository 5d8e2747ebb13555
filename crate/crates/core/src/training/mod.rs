//! Losses, the joint training loop, checkpoints, metrics and evaluation.

pub mod checkpoint;
pub mod config;
pub mod eval;
pub mod losses;
pub mod metrics;
pub mod trainer;

pub use checkpoint::Checkpoint;
pub use config::{total_g_loss, GLossWeights, LossParts, TrainConfig};
pub use eval::{evaluate, evaluate_identity, evaluate_supervise, evaluate_transfer, generate, EvalReport};
pub use losses::{loss_adversarial_d, loss_adversarial_g, loss_reconstruct, loss_supervise};
pub use metrics::{EpochRecord, MetricsLog, StepRecord};
pub use trainer::{checkpoint_config, load_transfer, GBackward, Trainer, BEST_CKPT, LAST_CKPT, METRICS_CSV, VALIDATION_CSV};
