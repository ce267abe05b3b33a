//! Scenario configuration and the subcommand drivers behind the CLI.

pub mod config;
pub mod runner;
