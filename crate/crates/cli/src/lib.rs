//! File formats and command implementations behind the `dnm` binary.
//!
//! Models are JSON documents (see [`model_file`]), observation series are
//! CSV (see [`series_file`]), and every probability is printed with six
//! decimals so output is byte-stable across runs.

pub mod commands;
pub mod error;
pub mod format;
pub mod model_file;
pub mod series_file;

pub use error::{CliError, CliResult};
