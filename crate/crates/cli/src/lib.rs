//! Config parsing, run records and the experiment runner behind the `rfwave` binary.

pub mod config;
pub mod error;
pub mod record;
pub mod runner;
