//! Library side of the `softdec` binary: configuration handling and the
//! subcommands, so tests can drive them without spawning processes.

pub mod commands;
pub mod config;

pub use commands::{Failure, GraphFile, ModelKind};
pub use config::{PipelineConfig, Overrides};
