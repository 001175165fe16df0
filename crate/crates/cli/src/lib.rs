//! Library half of the `waveformer` binary: file formats, run configuration,
//! subcommand implementations and the built-in self test.

pub mod commands;
pub mod config;
pub mod error;
pub mod format;
pub mod selftest;

pub use error::CliError;
