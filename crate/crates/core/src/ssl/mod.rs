//! Training engine: losses, pseudo-labels, entropy filtering and the
//! warm-up / consistency / filtering loop.

mod config;
pub mod gradcheck;
pub mod loss;
pub mod pseudo;
mod trainer;

pub use config::{Mode, TrainConfig};
pub use loss::{cross_entropy_loss, segmentation_loss, soft_dice_loss, softmax_backward, unified_loss, UnifiedLoss};
pub use pseudo::{drop_count, filter_unlabeled, image_entropy, make_pseudo_label, FilterOutcome, UncertaintyScore};
pub use trainer::{
    batch_loss, batch_loss_and_grad, filter_events_csv, history_csv, pseudo_label_pair, segment, softmax_deviation,
    train, BatchItem, BatchResult, EpochRecord, FilterEvent, TrainOutcome, TrainState, Trainer, FILTER_HEADER,
    HISTORY_HEADER,
};

#[cfg(test)]
mod tests;
