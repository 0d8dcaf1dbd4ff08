//! File formats, plotting, parallel execution and the experiment pipelines
//! behind the `actlab` command.

pub mod checkpoint_file;
pub mod cli;
pub mod config;
pub mod error;
pub mod exec;
pub mod pipeline;
pub mod plot;
pub mod tables;

pub use error::{AppError, ExitCode};
pub use exec::Threads;
