//! Automatic surface defect detection on line-scanned point clouds.
//!
//! Two detectors are combined: a robust polynomial fit per scan line marks
//! points that deviate from the ideal surface, and a statistical outlier
//! filter removes sparse points that do not belong to the part. Surviving
//! candidates are clustered into typed defect regions.

mod config;
mod defects;
mod error;
mod linefit;
mod sor;
pub mod synthetic;

pub use config::{PerceptionConfig, StageOrder};
pub use defects::{detect_defects, DefectCounts, DefectKind, DefectRegion, DefectReport};
pub use error::{PerceptionError, Result};
pub use linefit::{fit_line_robust, regression_candidates, LineFit, RegressionResult};
pub use sor::{statistical_outlier_removal, SorResult};
pub use synthetic::{make_synthetic_scan, DefectSeed, SurfaceKind, SyntheticScan, SyntheticScanSpec};
