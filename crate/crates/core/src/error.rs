//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors raised by parameter validation, state checks and numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter violated one of its invariants.
    #[error("{field} = {value}: {reason}")]
    InvalidParameter {
        field: &'static str,
        value: f64,
        reason: String,
    },

    /// A density matrix failed its Hermiticity, positivity or trace check.
    #[error("invalid state: {0}")]
    InvalidState(String),

    /// The adaptive quadrature exhausted its refinement budget.
    #[error("quadrature did not converge: estimate {estimate}, error bound {error_bound}")]
    QuadratureNotConverged { estimate: f64, error_bound: f64 },

    /// The rotation duration is too long for the coherent-fidelity model.
    #[error("rotation outside validity of coherent-fidelity model (T_r/T2* = {ratio})")]
    RotationOutsideModel { ratio: f64 },

    /// A time bin was scattered a second time in the same run.
    #[error("{0} bin already scattered")]
    AlreadyScattered(&'static str),

    /// The heralded state has zero trace.
    #[error("no heralded weight")]
    NoHeraldedWeight,

    /// Input data cannot support the requested estimate.
    #[error("degenerate data: {0}")]
    DegenerateData(String),

    /// A nonlinear fit stopped before meeting its convergence criterion.
    #[error("fit did not converge after {iterations} iterations (last iterate {last:?})")]
    FitNotConverged { iterations: usize, last: [f64; 3] },
}

impl Error {
    pub(crate) fn invalid(field: &'static str, value: f64, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            value,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
