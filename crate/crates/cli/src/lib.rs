//! Pipeline driver behind the `privnav` binary.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use thiserror::Error;

/// Failures with a dedicated exit code.
#[derive(Debug, Error)]
pub enum Fail {
    #[error("config error: {0}")]
    Config(String),
    #[error("missing artifact {}: {hint}", path.display())]
    Missing { path: PathBuf, hint: String },
}

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_MISSING: i32 = 3;
pub const EXIT_RUNTIME: i32 = 4;

/// Exit status for an error raised by a command.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    match err.downcast_ref::<Fail>() {
        Some(Fail::Config(_)) => EXIT_CONFIG,
        Some(Fail::Missing { .. }) => EXIT_MISSING,
        None => EXIT_RUNTIME,
    }
}

pub const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (", env!("PRIVNAV_GIT_DESCRIBE"), ")");

pub fn version() -> &'static str {
    VERSION
}
