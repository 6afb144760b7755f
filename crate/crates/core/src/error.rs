use std::path::PathBuf;

/// Crate-wide error type. Variants map onto the CLI's exit-code
/// categories: config, input parse, capacity limit, and plain I/O.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed or inconsistent input record; always carries the
    /// 1-based line number of the offending line.
    #[error("{source_name}:{line}: {reason}")]
    Parse {
        source_name: String,
        line: u64,
        reason: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    /// An instance exceeded a hard size limit (exact solver cap,
    /// toy-process summation cap, document length cap).
    #[error("capacity limit exceeded: {0}")]
    Capacity(String),

    /// A plan does not belong to the corpus (or reference plan) it was
    /// paired with.
    #[error("plan/corpus mismatch: {0}")]
    PlanMismatch(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(source_name: impl Into<String>, line: u64, reason: impl Into<String>) -> Self {
        Error::Parse {
            source_name: source_name.into(),
            line,
            reason: reason.into(),
        }
    }
}
