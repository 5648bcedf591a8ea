use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use sandbench_geometry::{Point3, PointCloud, Vector3};

use crate::{PerceptionConfig, PerceptionError, Result};

/// Robust polynomial fit of one scan line.
///
/// Heights are measured along the view axis and `t` is the arc length of the
/// line projected onto the plane orthogonal to it. The polynomial is stored
/// over the normalized parameter `(t - t_offset) / t_scale`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub line: u32,
    pub coefficients: Vec<f64>,
    pub t_offset: f64,
    pub t_scale: f64,
    /// Signed height above the fitted curve, per point, meters.
    pub residuals: Vec<f64>,
    pub rms_residual: f64,
    /// Points used by the final fit.
    pub inliers: usize,
}

impl LineFit {
    pub fn eval(&self, t: f64) -> f64 {
        let s = (t - self.t_offset) / self.t_scale;
        self.coefficients.iter().rev().fold(0.0, |acc, c| acc * s + c)
    }
}

pub(crate) fn arc_parameter(points: &[Point3], view: &Vector3) -> Vec<f64> {
    let mut t = Vec::with_capacity(points.len());
    let mut acc = 0.0;
    for (i, p) in points.iter().enumerate() {
        if i > 0 {
            let d = p - points[i - 1];
            acc += (d - view * d.dot(view)).norm();
        }
        t.push(acc);
    }
    t
}

fn least_squares(t: &[f64], h: &[f64], degree: usize) -> Option<Vec<f64>> {
    let rows = t.len();
    let a = DMatrix::from_fn(rows, degree + 1, |r, c| t[r].powi(c as i32));
    let b = DVector::from_column_slice(h);
    let svd = a.svd(true, true);
    let x = svd.solve(&b, 1e-12).ok()?;
    Some(x.iter().copied().collect())
}

fn poly(coeffs: &[f64], s: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * s + c)
}

/// Least-squares fit with iterative exclusion of points whose residual
/// exceeds the configured threshold. Residuals of all points are reported
/// against the final fit.
pub fn fit_line_robust(
    line: u32,
    points: &[Point3],
    view_axis: &Vector3,
    cfg: &PerceptionConfig,
) -> Result<LineFit> {
    let degree = cfg.poly_degree;
    if points.len() < degree + 2 {
        return Err(PerceptionError::InsufficientPoints {
            needed: degree + 2,
            got: points.len(),
        });
    }
    let view = view_axis.normalize();
    let t_raw = arc_parameter(points, &view);
    let heights: Vec<f64> = points.iter().map(|p| p.coords.dot(&view)).collect();

    let t_min = t_raw.iter().copied().fold(f64::INFINITY, f64::min);
    let t_max = t_raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let t_offset = 0.5 * (t_min + t_max);
    let t_scale = if t_max > t_min { 0.5 * (t_max - t_min) } else { 1.0 };
    let s: Vec<f64> = t_raw.iter().map(|t| (t - t_offset) / t_scale).collect();

    let fit_subset = |mask: &[bool]| -> Option<Vec<f64>> {
        let (ts, hs): (Vec<f64>, Vec<f64>) = s
            .iter()
            .zip(&heights)
            .zip(mask)
            .filter(|(_, &keep)| keep)
            .map(|((t, h), _)| (*t, *h))
            .unzip();
        least_squares(&ts, &hs, degree)
    };
    let residuals_for =
        |c: &[f64]| -> Vec<f64> { s.iter().zip(&heights).map(|(t, h)| h - poly(c, *t)).collect() };

    let mut mask = vec![true; points.len()];
    let mut coeffs = fit_subset(&mask).ok_or(PerceptionError::InsufficientPoints {
        needed: degree + 2,
        got: points.len(),
    })?;
    for _ in 0..cfg.robust_iterations {
        let residuals = residuals_for(&coeffs);
        let next: Vec<bool> = residuals
            .iter()
            .map(|r| r.abs() <= cfg.residual_threshold_abs)
            .collect();
        if next == mask || next.iter().filter(|&&k| k).count() < degree + 1 {
            break;
        }
        match fit_subset(&next) {
            Some(c) => {
                coeffs = c;
                mask = next;
            }
            None => break,
        }
    }

    let residuals = residuals_for(&coeffs);
    let rms_residual =
        (residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64).sqrt();
    Ok(LineFit {
        line,
        coefficients: coeffs,
        t_offset,
        t_scale,
        residuals,
        rms_residual,
        inliers: mask.iter().filter(|&&k| k).count(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    /// Per point: residual exceeds the threshold.
    pub flagged: Vec<bool>,
    /// Per point signed residual; zero on skipped lines.
    pub residuals: Vec<f64>,
    /// Lines too short to fit.
    pub skipped_lines: Vec<u32>,
}

pub fn regression_candidates(cloud: &PointCloud, cfg: &PerceptionConfig) -> Result<RegressionResult> {
    cfg.validate()?;
    let runs = cloud.lines().ok_or(PerceptionError::MissingLineIndex)?;
    let mut flagged = vec![false; cloud.len()];
    let mut residuals = vec![0.0; cloud.len()];
    let mut skipped_lines = Vec::new();
    for (line, range) in runs {
        let pts = &cloud.points[range.clone()];
        match fit_line_robust(line, pts, &cloud.meta.view_axis, cfg) {
            Ok(fit) => {
                for (offset, r) in fit.residuals.iter().enumerate() {
                    residuals[range.start + offset] = *r;
                    flagged[range.start + offset] = r.abs() > cfg.residual_threshold_abs;
                }
            }
            Err(PerceptionError::InsufficientPoints { .. }) => skipped_lines.push(line),
            Err(e) => return Err(e),
        }
    }
    Ok(RegressionResult {
        flagged,
        residuals,
        skipped_lines,
    })
}
