use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke a documented precondition (shape mismatch, empty input, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// Bad user data: unknown symbol, malformed manifest line, etc.
    #[error("input error: {0}")]
    Input(String),

    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    /// No complete left-right no-skip path exists.
    #[error("infeasible alignment: {frames} frames cannot cover {states} states")]
    Infeasible { frames: usize, states: usize },

    #[error("path enumeration refused: {count} paths exceeds limit {limit}")]
    TooManyPaths { count: u128, limit: u128 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub fn format(offset: u64, message: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: message.into(),
        }
    }

    /// Process exit code for the CLI: 1 usage/config, 2 data, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Contract(_) | Error::Config(_) => 1,
            Error::Input(_)
            | Error::Format { .. }
            | Error::Infeasible { .. }
            | Error::TooManyPaths { .. }
            | Error::Io(_) => 2,
            Error::Numerical(_) => 3,
        }
    }
}
