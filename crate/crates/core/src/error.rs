use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("design matrix is rank deficient")]
    RankDeficient,

    #[error("simplex did not terminate within {iterations} pivots")]
    NumericalFailure { iterations: usize },

    #[error("all covariate values are equal; cannot place spline knots")]
    DegenerateData,

    #[error("spline knots are not strictly increasing inside the domain")]
    DuplicateKnots,

    #[error("covariate value {x} lies outside the domain [{lo}, {hi}]")]
    OutOfDomain { x: f64, lo: f64, hi: f64 },

    #[error("quantile level {tau} lies outside the fitted grid [{lo}, {hi}]")]
    ExtrapolationInTau { tau: f64, lo: f64, hi: f64 },

    #[error("stratified model must be rearranged before simulation")]
    NotRearranged,

    #[error("halfspaces have no common point")]
    EmptyIntersection,

    #[error("halfspace intersection is unbounded")]
    UnboundedRegion,

    #[error("angle bin {bin} contains no points")]
    EmptyAngleBin { bin: usize },

    #[error("no observations within {halfwidth} of {center}")]
    EmptyWindow { center: f64, halfwidth: f64 },

    #[error("fit at tau = {tau} failed: {source}")]
    AtTau {
        tau: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("direction sweep failed at theta = {failed:?}")]
    PartialSweep {
        failed: Vec<f64>,
        #[source]
        first: Box<Error>,
    },

    #[error("file not found: {0}")]
    FileNotFound(PathBuf),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("non-numeric values in rows {rows:?}")]
    Parse { rows: Vec<usize> },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Unwraps context layers (`AtTau`, `PartialSweep`) to the originating error.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtTau { source, .. } => source.root(),
            Error::PartialSweep { first, .. } => first.root(),
            other => other,
        }
    }
}
