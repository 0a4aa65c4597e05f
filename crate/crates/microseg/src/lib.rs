//! IO, file formats, run manifests and the command-line pipeline built on
//! `microseg-core`.

pub mod cli;
pub mod error;
pub mod io;
pub mod manifest;
pub mod pipeline;

pub use error::{CliError, CliResult};
