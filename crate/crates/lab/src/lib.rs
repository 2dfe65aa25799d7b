//! Command-line laboratory for `mangle-core`: configuration, parallel Monte
//! Carlo, CSV output and the `mangle` binary's subcommands.

pub mod cli;
pub mod commands;
pub mod config;
pub mod output;
pub mod runner;
pub mod validate;
