//! File formats, figures, run manifests and parallel drivers around
//! [`asif_core`], plus the `asif` command line.

pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod manifest;
pub mod parallel;
pub mod svg;

pub use asif_core;
pub use error::{CliError, Result};
