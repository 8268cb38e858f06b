//! Experiment harness: configuration, Monte-Carlo sweeps and result files.

mod config;
mod output;
mod sweep;

pub use config::*;
pub use output::*;
pub use sweep::*;
