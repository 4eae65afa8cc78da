//! Simulation of Gaussian random fields and estimation of Berman-type
//! sojourn constants.

pub mod error;
pub mod berman;
pub mod gauss;
pub mod grid;
pub mod lab;
pub mod mc;
pub mod rng;
pub mod sojourn;
pub mod special;

pub use error::{Error, Result};
pub use grid::{Domain, Field2D, GridSpec, Lattice2D, Realization, SamplePath};
pub use mc::McSettings;
pub use sojourn::{level_for_sojourn, sojourn_time, Level, SojournProfile};
