//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Two tensor shapes that had to agree did not.
    #[error("{op}: dimension mismatch between {lhs:?} and {rhs:?}")]
    DimMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    /// An index (class label, node id, ...) was out of range.
    #[error("{what} {index} out of range (limit {limit})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        limit: usize,
    },

    /// A caller violated an operation's contract.
    #[error("contract violation: {0}")]
    Contract(String),

    /// An invalid configuration (layer chain, dataset spec, mode/dataset
    /// combination, ...).
    #[error("invalid config: {0}")]
    Config(String),

    /// Lookup of a named head failed.
    #[error("unknown head id {0:?}")]
    UnknownHead(String),

    /// A head with that id already exists.
    #[error("head id {0:?} already exists")]
    DuplicateHead(String),

    /// A file did not match the expected on-disk format.
    #[error("format error: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Training produced a non-finite loss.
    #[error("diverged: non-finite loss at epoch {epoch}, step {step}")]
    Diverged { epoch: u32, step: usize },
}
