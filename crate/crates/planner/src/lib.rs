//! Meander tool paths over scanned surfaces.
//!
//! The surface is sliced by parallel planes across its principal axis, each
//! slice becomes a smoothed contour, and alternate contours are reversed and
//! joined into one serpentine path with approach and depart moves.

mod config;
mod contour;
mod error;
mod metrics;
mod path;
mod plan;
mod planarity;

pub use config::{Interpolation, PlannerConfig};
pub use contour::{define_slicing_planes, extract_contour, Contour, ContourParams, SlicingPlane};
pub use error::{PlannerError, Result};
pub use metrics::{alignment_metrics, AlignmentMetrics};
pub use path::{
    add_approach_depart, connect_meander, orient_waypoints, orient_with, tool_orientation,
    PathPoint, SegmentKind, ToolPath, Waypoint,
};
pub use plan::{lowpass_heights, median_spacing, plan_path, PlanOutput};
pub use planarity::{check_projectively_planar, PlanarityReport, PlanarityViolation};
