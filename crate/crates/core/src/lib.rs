//! Benchmark toolkit for computational ghost imaging with retina-like
//! (foveated) and temporally coarse-to-fine binary speckle patterns.

pub mod cellmaps;
pub mod error;
pub mod forward;
pub mod harness;
pub mod metrics;
pub mod patterns;
pub mod raster;
pub mod recon;

pub use error::{Error, Result};
pub use raster::{Image, RoiSpec};
