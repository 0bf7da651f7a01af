//! Velocity estimation and tracking of a moving target from a network of
//! binary range-rate sensors, each reporting only whether the target is
//! getting closer (`+`) or moving away (`-`).

pub mod analysis;
pub mod cli;
pub mod config;
pub mod error;
pub mod geom;
pub mod hull;
pub mod observe;
pub mod ppr;
pub mod rng;
pub mod sim;
pub mod svm;
pub mod track;

pub use error::{Error, Result};
