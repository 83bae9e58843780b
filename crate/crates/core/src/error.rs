use thiserror::Error;

use crate::optimizer::SaddleCertificate;

/// Errors raised by the library.
///
/// Every variant has a stable machine-readable [`Error::code`] so that front
/// ends can surface failures without parsing the message text.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },
    #[error("invalid triplet: {}", .0.join("; "))]
    InvalidTriplet(Vec<String>),
    #[error("invalid utility: {0}")]
    InvalidUtility(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("uncertainty set has no vertices")]
    EmptyUncertaintySet,
    #[error("constraint set excludes the origin (halfspace {index} has offset {offset})")]
    OriginExcluded { index: usize, offset: f64 },
    #[error("polyhedron is empty")]
    Infeasible,
    #[error("feasible set is not compact")]
    NotCompact,
    #[error("box enumerates {count} vertices, more than the cap of {cap}")]
    TooManyVertices { count: u64, cap: u64 },
    #[error("density support [{lo}, {hi}] contains the origin")]
    SupportContainsZero { lo: f64, hi: f64 },
    #[error("y^T z = {s} < -1 is outside the domain of the power integrand")]
    OutsideDomain { s: f64 },
    #[error("gradient undefined: y^T z = {s} is at the singularity -1")]
    AtSingularity { s: f64 },
    #[error("optimizer did not converge: {0}")]
    DidNotConverge(String),
    #[error("saddle point not certified: max residual {residual:e} exceeds {threshold:e}")]
    SaddleNotCertified {
        residual: f64,
        threshold: f64,
        best: Box<SaddleCertificate>,
    },
    #[error(
        "negative wealth factor 1 + pi^T z = {factor}; pi lies outside the natural constraints"
    )]
    NegativeWealth { factor: f64 },
    #[error("linear program failed: {0}")]
    Lp(String),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::InvalidTriplet(_) => "invalid_triplet",
            Error::InvalidUtility(_) => "invalid_utility",
            Error::InvalidInput(_) => "invalid_input",
            Error::EmptyUncertaintySet => "empty_uncertainty_set",
            Error::OriginExcluded { .. } => "origin_excluded",
            Error::Infeasible => "infeasible",
            Error::NotCompact => "not_compact",
            Error::TooManyVertices { .. } => "too_many_vertices",
            Error::SupportContainsZero { .. } => "support_contains_zero",
            Error::OutsideDomain { .. } => "outside_domain",
            Error::AtSingularity { .. } => "at_singularity",
            Error::DidNotConverge(_) => "did_not_converge",
            Error::SaddleNotCertified { .. } => "saddle_not_certified",
            Error::NegativeWealth { .. } => "negative_wealth",
            Error::Lp(_) => "lp_failure",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
