//! Loss, optimizer, learning-rate schedule, segmenting and the training loop.

mod adam;
mod data;
mod loss;
mod schedule;
mod trainer;

pub use adam::{adam_step, AdamConfig, OptimizerState};
pub use data::{
    epoch_order, prepare_segments, prepare_utterances, segment_corpus, Example, Pair, Segment,
};
pub use loss::{batch_loss, loss, loss_gradient, masked_loss, masked_loss_gradient, RMS_FLOOR};
pub use schedule::{schedule_update, ScheduleEvent, ScheduleState};
pub use trainer::{evaluate, history_csv, write_history_csv, EpochRecord, TrainConfig, Trainer};
