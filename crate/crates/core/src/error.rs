use thiserror::Error;

/// Errors produced by the embedding engine.
#[derive(Debug, Error)]
pub enum Error {
    /// Operand shapes are incompatible (vector lengths, tensor extents, table sizes).
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Operands carry different algebra tags, or an id is out of vocabulary range.
    #[error("algebra mismatch: {0}")]
    Algebra(String),

    /// A configuration value is outside its accepted range.
    #[error("invalid config: {0}")]
    Config(String),

    /// A dataset line could not be parsed.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// The file is not a checkpoint or was written by an unsupported version.
    #[error("unsupported checkpoint: {0}")]
    CheckpointVersion(String),

    /// The checkpoint was trained on a different vocabulary.
    #[error("checkpoint vocabulary hash does not match the store")]
    VocabHashMismatch,

    /// The checkpoint ends before all declared payload bytes.
    #[error("checkpoint file truncated")]
    CheckpointTruncated,

    /// Parameters and store disagree on vocabulary sizes.
    #[error("vocabulary mismatch: {0}")]
    Vocab(String),

    /// A documented precondition was violated by the caller.
    #[error("contract violation: {0}")]
    Contract(String),
}

pub type Result<T> = std::result::Result<T, Error>;
