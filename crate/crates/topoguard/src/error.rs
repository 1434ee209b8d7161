//! Error type shared across the crate.
//!
//! Every fallible operation returns [`Result`]. The variants are grouped so
//! that the command-line frontend can map them onto stable process exit
//! codes: configuration and shape problems exit with 2, malformed or
//! unreadable data files with 3, and numerical failures with 4.

use std::io;

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes surfaced by this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied option is out of range or inconsistent.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Matrix or vector dimensions do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A node, class, or edge index is out of bounds.
    #[error("index out of bounds: {0}")]
    Index(String),

    /// A data file exists but its contents violate the expected format.
    #[error("{path}:{line}: {message}")]
    Format {
        /// File that failed to parse.
        path: String,
        /// 1-based line number of the offending record (0 if unknown).
        line: usize,
        /// What was wrong with it.
        message: String,
    },

    /// An underlying filesystem operation failed.
    #[error("{path}: {source}")]
    Io {
        /// File or directory involved.
        path: String,
        /// The OS-level error.
        #[source]
        source: io::Error,
    },

    /// A computation produced non-finite values or failed to converge.
    #[error("numerical failure: {0}")]
    Numeric(String),

    /// The graph degenerated (e.g. a node lost every connection including
    /// its self-loop), so normalization is undefined.
    #[error("degenerate graph: {0}")]
    Degeneracy(String),
}

impl Error {
    /// Process exit code used by the CLI for this error class.
    ///
    /// Configuration/usage errors map to 2, data errors to 3, and numerical
    /// failures to 4, leaving 1 free for unexpected panics.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Shape(_) | Error::Index(_) => 2,
            Error::Format { .. } | Error::Io { .. } => 3,
            Error::Numeric(_) | Error::Degeneracy(_) => 4,
        }
    }

    /// Convenience constructor for [`Error::Io`].
    pub fn io(path: impl Into<String>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Convenience constructor for [`Error::Format`].
    pub fn format(path: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_group_by_error_class() {
        assert_eq!(Error::Config("x".into()).exit_code(), 2);
        assert_eq!(Error::Shape("x".into()).exit_code(), 2);
        assert_eq!(Error::Index("x".into()).exit_code(), 2);
        assert_eq!(Error::format("f", 3, "bad").exit_code(), 3);
        assert_eq!(
            Error::io("f", io::Error::new(io::ErrorKind::NotFound, "gone")).exit_code(),
            3
        );
        assert_eq!(Error::Numeric("x".into()).exit_code(), 4);
        assert_eq!(Error::Degeneracy("x".into()).exit_code(), 4);
    }

    #[test]
    fn format_error_displays_path_and_line() {
        let err = Error::format("graph.tsv", 17, "self-loop 4 -> 4");
        assert_eq!(err.to_string(), "graph.tsv:17: self-loop 4 -> 4");
    }
}
