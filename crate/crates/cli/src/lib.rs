//! Library side of the `nlfb` command-line tool: scenario files, output
//! writers, subcommands and the verification suites.

pub mod bundled;
pub mod commands;
pub mod config;
pub mod output;
pub mod verify;
