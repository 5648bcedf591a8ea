use sandbench_geometry::GeometryError;

#[derive(Debug, thiserror::Error)]
pub enum PlannerError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("slicing plane {plane} has no surface points in its band")]
    EmptyBand { plane: usize },
    #[error("no contours to connect")]
    NoContours,
    #[error("cloud has no normals")]
    MissingNormals,
    #[error("surface is not projectively planar: {cells} cells exceed the height spread limit")]
    NotProjectivelyPlanar { cells: usize },
    #[error("path has no contact waypoints")]
    NoContactWaypoints,
    #[error("contact waypoint {distance} m from the surface exceeds band half-width {band} m")]
    OffSurface { distance: f64, band: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

pub type Result<T> = std::result::Result<T, PlannerError>;
