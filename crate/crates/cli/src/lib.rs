//! Pipeline driver library behind the `glassflow` binary.
//!
//! One module per concern: subcommand implementations, experiment
//! configuration, container file formats, input hashing, figure rendering,
//! and the thread-pool executor. The binary in `main.rs` only parses flags
//! and dispatches here.

pub mod commands;
pub mod config;
pub mod errors;
pub mod exec;
pub mod formats;
pub mod provenance;
pub mod svg;
