//! The `coxhecke` command-line tool: configuration, checks and report
//! rendering. `main.rs` is a thin clap front end over [`commands`].

pub mod checks;
pub mod commands;
pub mod config;
