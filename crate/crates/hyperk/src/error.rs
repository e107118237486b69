//! Crate-wide error type with CLI exit-code classification.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad configuration: unknown keys, invalid parameter ranges, hash mismatches.
    #[error("config error: {0}")]
    Config(String),

    /// Bad input data: missing files, malformed rows, unknown tokens, orphan ids.
    #[error("data error: {0}")]
    Data(String),

    /// Malformed CSV row with source location.
    #[error("data error: {file}:{line}:{column}: {message}")]
    Malformed {
        file: String,
        line: u64,
        column: String,
        message: String,
    },

    /// Numeric failure: divergence, non-finite values, contract violations.
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    /// Process exit code: 0 success, 2 config error, 3 data error, 4 numeric failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Config(_) => 2,
            Error::Data(_) | Error::Malformed { .. } | Error::Io(_) => 3,
            Error::Numeric(_) => 4,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Data(e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_classify_errors() {
        assert_eq!(Error::config("x").exit_code(), 2);
        assert_eq!(Error::data("x").exit_code(), 3);
        assert_eq!(Error::numeric("x").exit_code(), 4);
        let io = Error::from(std::io::Error::other("x"));
        assert_eq!(io.exit_code(), 3);
        let malformed = Error::Malformed {
            file: "labs.csv".into(),
            line: 3,
            column: "value".into(),
            message: "bad".into(),
        };
        assert_eq!(malformed.exit_code(), 3);
        assert_eq!(malformed.to_string(), "data error: labs.csv:3:value: bad");
    }
}
