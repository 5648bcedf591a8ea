use sandbench_geometry::GeometryError;

#[derive(Debug, thiserror::Error)]
pub enum ControlError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("path has no contact waypoints")]
    NoContactWaypoints,
    #[error("trajectory is empty")]
    EmptyTrajectory,
    #[error("height field has no occupied cells")]
    EmptySurface,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ControlError>;
