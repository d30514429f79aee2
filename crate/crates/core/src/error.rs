use thiserror::Error;

use crate::projection::Infeasibility;
use crate::tensor::Violation;

/// Errors produced anywhere in the estimation pipeline.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// An index or axis fell outside the ambient shape.
    #[error("index out of range: {0}")]
    Range(String),

    /// Inputs violate the mathematical preconditions of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Input array is not a member of the positive-margin class.
    #[error("array is not a valid probability array with positive margins: {0:?}")]
    NotInP(Vec<Violation>),

    /// No array with the requested margins and exactly the given support exists.
    #[error("no feasible projection: {0}")]
    NoFeasibleProjection(Box<Infeasibility>),

    /// IPF was still making progress when it ran out of sweeps.
    #[error("IPF did not converge in {sweeps} sweeps (margin error {margin_error:e})")]
    MaxSweepsExceeded { sweeps: usize, margin_error: f64 },

    /// Observed data contradict a declared structural zero.
    #[error("positive count {count} at structural zero {cell:?}")]
    SupportContradiction { cell: Vec<usize>, count: u64 },

    /// Array cannot be written as gamma_q + A theta for the given basis.
    #[error("array is not in the affine span of the basis (residual {residual:e})")]
    NotInAffineSpan { residual: f64 },

    /// Matrix that must be positive definite is not (numerically).
    #[error("matrix is not positive definite: pivot {pivot:e} at index {index}")]
    Conditioning { index: usize, pivot: f64 },

    /// The dependence space is trivial, so there is nothing to test.
    #[error("degenerate test: the dependence space has dimension 0")]
    DegenerateTest,

    /// No observations.
    #[error("empty data: total count is zero")]
    EmptyData,

    /// Raw relative frequencies leave a support cell empty (only without smoothing).
    #[error("support cell {cell:?} has no observations; enable smoothing")]
    EmptyCell { cell: Vec<usize> },

    /// Malformed input document.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Shapes or lengths disagree.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable machine-readable name, used in CLI error objects.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Range(_) => "range",
            Error::Domain(_) => "domain",
            Error::NotInP(_) => "not_in_p",
            Error::NoFeasibleProjection(_) => "no_feasible_projection",
            Error::MaxSweepsExceeded { .. } => "max_sweeps_exceeded",
            Error::SupportContradiction { .. } => "support_contradiction",
            Error::NotInAffineSpan { .. } => "not_in_affine_span",
            Error::Conditioning { .. } => "conditioning",
            Error::DegenerateTest => "degenerate_test",
            Error::EmptyData => "empty_data",
            Error::EmptyCell { .. } => "empty_cell",
            Error::Parse { .. } => "parse",
            Error::DimensionMismatch(_) => "dimension_mismatch",
        }
    }
}
