//! Model-constrained tangent-slope learning for method-of-lines PDE surrogates.

pub mod analysis;
pub mod autodiff;
pub mod error;
pub mod integrators;
pub mod io;
pub mod model;
pub mod pde;
pub mod rng;
pub mod training;

pub use error::{Error, Result};
