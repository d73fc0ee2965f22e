pub mod config;
pub mod dsp;
pub mod enhance;
pub mod eval;
pub mod error;
pub mod io;
pub mod network;
pub mod synth;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
