//! Backward pass, losses, gradient checking, optimizer, and the training loop.

pub mod backward;
pub mod gradcheck;
pub mod loss;
pub mod optim;
pub mod trainer;

pub use backward::{backward, channel_contributions, BackwardMode, Gradients};
pub use gradcheck::{finite_diff_gradients, max_relative_error_by_block, relative_error};
pub use loss::{argmax, loss_and_output_grad, LossSpec};
pub use optim::{apply_update, OptimizerState};
pub use trainer::{
    epoch_order, evaluate, fit, mean_and_sample_std, multi_seed_eval, train_and_score, train_epoch,
    EpochRecord, EpochReport, EvalReport, MultiSeedReport, TrainConfig,
};
