use std::path::PathBuf;

/// Errors raised by the solver and its tooling.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical procedure failed; carries context such as the best bound
    /// an optimizer reached.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Geometry degenerated at a specific grid node.
    #[error("degenerate geometry at node {node} (direction {direction:?}): {reason}")]
    Degenerate {
        node: usize,
        direction: [f64; 3],
        reason: String,
    },

    /// The flow left the admissible class (H_F <= 0, u <= 0 or non-finite data).
    #[error(
        "flow breakdown at t = {t:.6} (node {node}, direction {direction:?}): {reason}; \
         try a finer grid or a smaller c_cfl"
    )]
    FlowBreakdown {
        t: f64,
        node: usize,
        direction: [f64; 3],
        reason: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("configuration error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
