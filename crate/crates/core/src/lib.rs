pub mod audioprep;
pub mod cli;
pub mod dataman;
pub mod error;
pub mod experiment;
pub mod fusion;
pub mod metrics;
pub mod numcore;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
