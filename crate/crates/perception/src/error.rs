use sandbench_geometry::GeometryError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PerceptionError {
    #[error("insufficient points: need {needed}, got {got}")]
    InsufficientPoints { needed: usize, got: usize },
    #[error("cloud has no scan-line index")]
    MissingLineIndex,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

pub type Result<T, E = PerceptionError> = std::result::Result<T, E>;
