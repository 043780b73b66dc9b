pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod field;
pub mod fourier;
pub mod imaging;
pub mod ica;
pub mod moments;
pub mod optics;
pub mod rngfield;
pub mod scene;
pub mod separability;

pub use error::{Error, Result};
