use thiserror::Error;

use crate::lattice::LatticeError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Lattice(#[from] LatticeError),

    #[error("pair separation must be positive, got {0}")]
    NonpositiveSeparation(f64),
    #[error("invalid model parameters: {0}")]
    InvalidParameters(String),
    #[error("non-finite position")]
    NonFinitePosition,
    #[error("operation requires a pair-interaction model")]
    ModelNotPairwise,
    #[error("operation requires a mass-spring model with plateaus")]
    ModelNotMassSpring,
    #[error("formula not applicable: {0}")]
    ModelNotApplicable(String),
    #[error("point {0:?} lies outside the interpolation domain")]
    OutOfDomain([f64; 3]),

    #[error("elastic core is not twice differentiable at the reference cell")]
    NotTwiceDifferentiable,
    #[error("quadratic form does not vanish on rigid directions (residual {0:e})")]
    KernelViolation(f64),
    #[error("matrix is not skew-symmetric (asymmetry {0:e})")]
    NonSkewInput(f64),
    #[error("inadmissible frame: {0}")]
    InadmissibleFrame(String),
    #[error("matrix is not a rotation")]
    NonRotation,

    #[error("halves interpenetrate: |u| = {norm} is below 2/k = {limit}")]
    Interpenetration { norm: f64, limit: f64 },
    #[error("no contact time found for the kink construction")]
    NoContactFound,
    #[error("descent did not converge: {reason} (best energy {best})")]
    NonConvergent { reason: String, best: f64 },

    #[error("jumps at {0} and {1} are too close for the splice radius")]
    JumpTooClose(f64, f64),
    #[error("crack profile does not match the rigid boundary data (deviation {0:e})")]
    ProfileBoundaryMismatch(f64),

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("report has no rows")]
    EmptyReport,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { field: field.into(), message: message.into() }
    }

    /// True for errors caused by bad user input rather than numerics.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config { .. } | Error::Parse(_) | Error::Lattice(_) | Error::InvalidParameters(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
