//! Command-line front end: scans, fits, snapshots and oracle checks.

pub mod commands;
pub mod config;
pub mod output;
