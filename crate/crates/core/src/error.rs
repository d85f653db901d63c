use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("edge {index} has zero length")]
    DegenerateEdge { index: usize },
    #[error("adjacent edge tangents at vertex {index} are antiparallel")]
    FoldedVertex { index: usize },
    #[error("polygon is not counterclockwise (signed area {area})")]
    ClockwiseOrientation { area: f64 },
    #[error("matrix is not positive definite (pivot {pivot}, value {value})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("bordered zero-mean system is singular")]
    SingularBorderedSystem,
    #[error("updated curve is invalid: {0}")]
    DegenerateUpdate(String),
    #[error("geometric auxiliary variable reached zero")]
    ZeroGeometricSav,
    #[error("Newton did not converge in {iterations} iterations (residual {residual:e})")]
    NewtonDivergence { iterations: usize, residual: f64 },
    #[error("reduced Jacobian is singular")]
    SingularJacobian,
    #[error("{which} dissipation inequality violated by {excess:e}")]
    DissipationViolation { which: &'static str, excess: f64 },
    #[error("unknown curve kind `{0}`")]
    UnknownCurveKind(String),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid override: {0}")]
    InvalidOverride(String),
    #[error("final time {final_time} is not an integer multiple of dt = {dt}")]
    PartialFinalStep { final_time: f64, dt: f64 },
    #[error("sweep is not a successive halving: {0}")]
    MismatchedSweep(String),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::TooFewVertices(_) => "TooFewVertices",
            Error::DegenerateEdge { .. } => "DegenerateEdge",
            Error::FoldedVertex { .. } => "FoldedVertex",
            Error::ClockwiseOrientation { .. } => "ClockwiseOrientation",
            Error::NotPositiveDefinite { .. } => "NotPositiveDefinite",
            Error::SingularBorderedSystem => "SingularBorderedSystem",
            Error::DegenerateUpdate(_) => "DegenerateUpdate",
            Error::ZeroGeometricSav => "ZeroGeometricSav",
            Error::NewtonDivergence { .. } => "NewtonDivergence",
            Error::SingularJacobian => "SingularJacobian",
            Error::DissipationViolation { .. } => "DissipationViolation",
            Error::UnknownCurveKind(_) => "UnknownCurveKind",
            Error::UnknownPreset(_) => "UnknownPreset",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::InvalidOverride(_) => "InvalidOverride",
            Error::PartialFinalStep { .. } => "PartialFinalStep",
            Error::MismatchedSweep(_) => "MismatchedSweep",
        }
    }
}
