//! Experiment driver for `gdnls-core`: config parsing, the named
//! experiments, artifact files and the report table.

pub mod artifacts;
pub mod config;
pub mod experiments;
pub mod report;
