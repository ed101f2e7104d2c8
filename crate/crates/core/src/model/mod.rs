//! Scalar score head, modality head, supervision objectives and training.

mod checkpoint;
mod gradcheck;
mod loss;
mod optim;
mod params;
mod train;

pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use gradcheck::{finite_diff_check, finite_diff_check_loss, finite_diff_norm_error};
pub use loss::{
    bce_loss, bpo_loss, listmle_loss, listmle_loss_for_permutation, modality_loss, mse_aux_loss,
    sigmoid, softplus, target_permutation, LossResult, LossType, UNSAFE_THRESHOLD,
};
pub use optim::{adamw_step, AdamWConfig, AdamWState};
pub use params::{ScorerGrads, ScorerParams};
pub use train::{
    featurize_groups, train, train_featurized, EpochStats, FeaturizedGroup, TrainConfig, TrainOutcome,
};
