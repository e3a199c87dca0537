//! Files, configuration and the command implementations.

pub mod array_file;
pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod csv_out;

pub use array_file::{ArrayFile, DType};
pub use checkpoint::Checkpoint;
pub use config::{ExperimentConfig, FlatConfig};
