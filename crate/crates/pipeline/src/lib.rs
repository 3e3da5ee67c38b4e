//! File formats, reports and the command-line pipeline around `oocyte-core`.
//!
//! Every subcommand is a function in [`commands`] taking a [`RunConfig`] and
//! paths, so the binary stays a thin argument parser.

pub mod commands;
pub mod config;
pub mod error;
pub mod fsutil;
pub mod manifest;
pub mod model_file;
pub mod pgm;
pub mod table;

pub use config::RunConfig;
pub use error::{PipelineError, Result};
pub use manifest::{ExpertOocyte, Manifest, ManifestEntry};
