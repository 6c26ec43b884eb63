//! Simulation and evaluation toolkit for interactive 3D lesion
//! segmentation: robot users that place corrective clicks against a
//! predictor, behaviour metrics that compare them to real annotators, and
//! deterministic phantoms plus file formats to drive it all end to end.

pub mod error;
pub mod io;
pub mod metrics;
pub mod morphology;
pub mod phantom;
pub mod predictor;
pub mod robots;
pub mod runner;
pub mod sampling;
pub mod volume;

pub use error::{Error, Result};
