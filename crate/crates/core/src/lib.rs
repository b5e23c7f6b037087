pub mod cli;
pub mod diffusion;
pub mod editor;
pub mod error;
pub mod eval;
pub mod grid;
pub mod guidance;
pub mod manifest;
pub mod math;
pub mod metrics;

pub use error::{Error, Result};
