//! Library side of the `toric-prescribe` command: configuration, file
//! formats and the work behind each subcommand.

pub mod commands;
pub mod config;
pub mod error;
pub mod files;
pub mod quadcheck;
