//! Error type shared across the crate.
//!
//! Variants map onto the process exit codes used by the `flowcast` binary:
//! `Config` → 2, `Data` → 3, `Numeric` → 4.

use std::fmt;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid configuration: bad schema, violated invariants, infeasible
    /// templates, invalid policies.
    #[error("configuration error: {0}")]
    Config(String),

    /// Missing or malformed data artifacts: files, traces, datasets,
    /// checkpoints, empty splits.
    #[error("data error: {0}")]
    Data(String),

    /// Numeric failure: NaN/Inf in forward or backward passes, diverging
    /// Sinkhorn scalings, failed gradient checks.
    #[error("numeric error: {0}")]
    Numeric(String),
}

impl Error {
    pub fn config(msg: impl fmt::Display) -> Self {
        Error::Config(msg.to_string())
    }

    pub fn data(msg: impl fmt::Display) -> Self {
        Error::Data(msg.to_string())
    }

    pub fn numeric(msg: impl fmt::Display) -> Self {
        Error::Numeric(msg.to_string())
    }

    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Data(_) => 3,
            Error::Numeric(_) => 4,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Data(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
