pub mod compositing;
pub mod config;
pub mod error;
pub mod guides;
mod par;
pub mod pipeline;
pub mod raster;
pub mod synthesis;
pub mod synthetic;
pub mod temporal;

pub use error::{ConfigError, Error, ErrorCategory, Result};
pub use par::current_num_threads;
pub use raster::{ImageFormat, ImagePyramid, RasterImage};
pub use synthesis::{NearestNeighborField, SynthesisParams, SynthesisResult};
