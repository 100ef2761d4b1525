//! File formats, event displays and batch experiments around `qtrack-core`.
//!
//! Everything that touches the file system lives here: the hits CSV, the QUBO
//! text format with its triplet mapping, solution files, SVG event displays,
//! line-delimited metrics, the run configuration and the command
//! implementations behind the `qtrack` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod experiments;
pub mod hits_csv;
pub mod metrics;
pub mod output;
pub mod qubo_file;
pub mod solution;
pub mod svg;

pub use error::{CliError, ParseError};
