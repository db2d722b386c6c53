//! File formats, parallel experiment runners, benchmarks and the command
//! line for [`circsketch_core`].

pub mod bench;
pub mod cli;
pub mod dataio;
pub mod error;
pub mod eval;
pub mod manifest;
pub mod parallel;

pub use error::{Error, Result};
