use thiserror::Error;

/// Errors raised while building or evaluating fabric components.
#[derive(Debug, Clone, Error)]
pub enum FabricError {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("matrix in {context} is not symmetric (relative asymmetry {asymmetry:.3e})")]
    AsymmetricMetric {
        context: &'static str,
        asymmetry: f64,
    },

    #[error("metric in {context} is not positive semidefinite")]
    IndefiniteMetric { context: &'static str },

    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    #[error("barrier domain violated in {what}: task value {value:.6e} <= 0")]
    BarrierViolation { what: String, value: f64 },

    #[error("empty term list in {context}")]
    EmptyTermList { context: &'static str },

    #[error("unknown tree node id {id}")]
    UnknownNode { id: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate task map evaluation in {context}")]
    DegenerateMap { context: &'static str },

    #[error("effective potential has no integrable form for term {term}")]
    NonIntegrablePotential { term: String },
}

pub type Result<T> = std::result::Result<T, FabricError>;
