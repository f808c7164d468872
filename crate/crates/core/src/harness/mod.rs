//! Experiment runner: configuration, regression fits, reports and the
//! experiments behind the command-line interface.

pub mod config;
pub mod experiments;
pub mod fit;
pub mod report;
pub mod selftest;
