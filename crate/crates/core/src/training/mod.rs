//! Windowed model-constrained training.

pub mod adam;
pub mod loss;
pub mod train;
pub mod windows;

pub use adam::AdamState;
pub use loss::{batch_loss, batch_loss_grad, window_loss, Batch, LossConfig};
pub use train::{checkpoint_mse, data_rms, randomize_input, train, train_with, EpochRecord, TrainConfig, TrainReport};
pub use windows::{make_windows, Window, WindowSet};
