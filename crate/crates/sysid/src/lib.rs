//! File formats, synthetic systems, benchmarks and the command line front end
//! around `sysid-core`.

pub mod bench;
pub mod commands;
pub mod config;
pub mod csvio;
pub mod error;
pub mod modelfile;
pub mod report;
pub mod sdpdump;
pub mod synth;

pub use error::{Error, Result};
