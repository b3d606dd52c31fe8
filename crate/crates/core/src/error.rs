//! Error taxonomy shared by every module in the crate.

use thiserror::Error;

/// Crate-wide error type.
///
/// Variants map one-to-one onto the failure classes of the pipeline: model
/// construction, numerical kernels, clustering/estimation degeneracies, and
/// data ingestion.
#[derive(Debug, Error)]
pub enum Error {
    /// The generative model description is inconsistent (e.g. a probability
    /// entry outside [0,1], an infeasible covariate law).
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// An operation received input violating its preconditions.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A numerical kernel failed to converge or produced a singular system.
    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    /// The fit produced a degenerate configuration (empty block, empty pair
    /// set) from which no estimate can be formed.
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    /// A data file could not be parsed.
    #[error("parse error: {0}")]
    ParseError(String),

    /// A configuration file or flag set is invalid.
    #[error("config error: {0}")]
    ConfigError(String),

    /// Preprocessing removed every node.
    #[error("empty graph: {0}")]
    EmptyGraph(String),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
