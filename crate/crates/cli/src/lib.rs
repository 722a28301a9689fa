//! Command-line driver: scenario files, CSV output and self-checks.

pub mod config;
pub mod output;
pub mod validate;
