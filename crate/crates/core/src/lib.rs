pub mod color;
pub mod dataset;
pub mod error;
pub mod estimators;
pub mod eval;
pub mod io;
pub mod metrics;
pub mod pano;
pub mod process;
pub mod raster;
pub mod strategies;
pub mod transport;

pub use error::{Error, Result};
pub use pano::Panorama;
pub use raster::{Encoding, RasterImage};
