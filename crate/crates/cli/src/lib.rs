//! Command-line front end: network description files in, matrices and CSV
//! tables out.

pub mod commands;
pub mod description;
pub mod output;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CliError {
    /// Bad description, flags or numerics the user can act on.
    #[error("{0}")]
    Input(String),
    #[error("cannot write {path}: {reason}")]
    Io { path: String, reason: String },
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFICATION_FAILED: i32 = 1;
pub const EXIT_INPUT_ERROR: i32 = 2;
