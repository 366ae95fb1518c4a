//! Decoupled RGB-D visual odometry.
//!
//! Rotation comes in closed form from plane normals tracked between frames;
//! translation from a kernel cross-correlator run on orthographic
//! projections of the rotation-aligned cloud. See `examples/` for one
//! runnable program per capability.

pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod fft;
pub mod geometry;
pub mod grid;
pub mod kcc;
pub mod normals;
pub mod pipeline;
pub mod planes;
pub mod rotation;
pub mod translation;

pub use config::RunConfig;
pub use error::{Error, Result};
