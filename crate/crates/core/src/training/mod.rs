//! Deep Q-learning: replay memory, exploration schedule, the training loop,
//! and checkpointing.

pub mod checkpoint;
pub mod replay;
pub mod schedule;
pub mod trainer;

pub use checkpoint::{
    load_checkpoint, load_q_network, save_checkpoint, CheckpointError, CheckpointMeta,
    KIND_PREDICTOR, KIND_Q_NETWORK,
};
pub use replay::{ReplayMemory, Transition};
pub use schedule::{discount_factor_per_step, EpsilonSchedule};
pub use trainer::{
    run_training, td_target, train_step, validation_success_rate, TrainConfig, TrainLogRow,
    TrainOutput, ValidationRecord,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training batch is empty")]
    EmptyBatch,
    #[error(transparent)]
    Net(#[from] crate::net::NetError),
    #[error(transparent)]
    Autograd(#[from] crate::tensor::AutogradError),
    #[error(transparent)]
    Tensor(#[from] crate::tensor::TensorError),
    #[error(transparent)]
    Sim(#[from] crate::sim::SimError),
}
