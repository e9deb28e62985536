//! Command-line driver for `mixtop`: configuration, subcommands, run manifest.

pub mod commands;
pub mod config;
pub mod manifest;
pub mod tables;

/// Whether this build runs sweeps on the rayon pool.
pub const PARALLEL: bool = cfg!(feature = "parallel");
