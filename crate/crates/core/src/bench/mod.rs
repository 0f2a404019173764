//! Robot benchmark, experiment configuration and Monte-Carlo harness.

mod config;
mod experiment;
mod report;
mod robot;

pub use config::*;
pub use experiment::*;
pub use report::*;
pub use robot::*;
