//! Truth right-hand sides, reference solvers, samplers and downsampling.

pub mod advection;
pub mod burgers;
pub mod grid;
pub mod kl;
pub mod navier_stokes;
pub mod reference;
pub mod sampling;
pub mod spectral;
pub mod trajectory;
pub mod truth;

pub use burgers::BurgersState;
pub use grid::Grid;
pub use kl::KlSampler;
pub use reference::solve_reference;
pub use trajectory::{downsample, Trajectory};
pub use truth::{TruthKind, TruthTangent};
