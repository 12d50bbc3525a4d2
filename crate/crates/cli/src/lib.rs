//! Library side of the `neurogsp` command-line tool: configuration, file
//! formats and subcommands.

pub mod commands;
pub mod config;
pub mod io;
