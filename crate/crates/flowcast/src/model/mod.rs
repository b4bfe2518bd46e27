//! Windowed message-passing delay predictor.
//!
//! Three blocks: encoders turn per-window flow features and static
//! queue/link features into embeddings; the message-passing stage refines
//! them along flow paths for a fixed number of iterations, with queue
//! embeddings carrying memory from window to window through a dedicated
//! GRU; a readout MLP maps final flow embeddings to a strictly positive
//! mean-delay prediction per (flow, window).

mod checkpoint;
mod config;
mod gradcheck;
mod net;
mod train;

pub use checkpoint::{Checkpoint, CheckpointParam, CHECKPOINT_SCHEMA};
pub use config::ModelConfig;
pub use gradcheck::{builtin_scenario, gradient_check, gradient_check_model, GradCheckItem, GradCheckReport};
pub use net::{
    build_forward, mape_loss, DelayModel, ForwardPass, PredRow, PredictionSet, WindowEmbeddings,
};
pub use train::{
    train, train_with_hooks, BlockNorms, EpochStats, TrainConfig, TrainData, TrainHistory,
    TrainHooks,
};
