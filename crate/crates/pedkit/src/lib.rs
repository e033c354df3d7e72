//! Pedestrian detection toolkit: box geometry with part transforms,
//! quantized anchors, dual-branch label assignment, alignment losses with
//! analytic gradients, branch fusion, FPPI/miss-rate evaluation, and a
//! deterministic synthetic benchmark.

pub mod anchors;
pub mod assignment;
pub mod cli;
pub mod config;
pub mod error;
pub mod evaluation;
pub mod fusion;
pub mod geometry;
pub mod io;
pub mod losses;
pub mod plot;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
pub use geometry::{Box, PartPool, PartSpec};
