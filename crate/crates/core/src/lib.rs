//! Bouncing-droplet Bell test simulator and contextual hidden-variable toolkit.

pub mod bellstats;
pub mod calibration;
pub mod config;
pub mod droplet;
pub mod error;
pub mod geometry;
pub mod hvt;
pub mod montecarlo;
pub mod simulation;
pub mod wavefield;

pub use error::{Error, Result};

/// Written into every output file next to the config hash.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
