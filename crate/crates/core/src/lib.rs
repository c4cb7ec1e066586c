//! Weighted shifts, Cesàro means of orbits and finite-horizon chaos probes.

pub mod cesaro;
pub mod chaostats;
pub mod detect;
pub mod error;
pub mod gallery;
pub mod literal;
pub mod logcore;
pub mod report;
pub mod semigroup;
pub mod shiftops;
pub mod weights;

pub use error::{Error, Result};
pub use logcore::{BigIndex, LogReal};
