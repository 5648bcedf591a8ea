use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::{GeometryError, Point3, Result, Vector3};

/// Unit a source file declared. Coordinates in memory are always meters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LengthUnit {
    #[serde(rename = "mm")]
    Millimeter,
    #[serde(rename = "m")]
    Meter,
}

impl LengthUnit {
    pub fn parse(token: &str) -> Result<Self> {
        match token.trim() {
            "mm" => Ok(Self::Millimeter),
            "m" => Ok(Self::Meter),
            other => Err(GeometryError::Unit(other.to_string())),
        }
    }

    /// Factor that converts a value in this unit to meters.
    pub fn to_meters(self) -> f64 {
        match self {
            Self::Millimeter => 1e-3,
            Self::Meter => 1.0,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Self::Millimeter => "mm",
            Self::Meter => "m",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CloudMeta {
    pub source: String,
    /// Unit declared by the source file.
    pub unit: LengthUnit,
    /// Direction the sensor looks back along; normals are oriented towards it.
    pub view_axis: Vector3,
}

impl Default for CloudMeta {
    fn default() -> Self {
        Self {
            source: String::new(),
            unit: LengthUnit::Meter,
            view_axis: Vector3::z(),
        }
    }
}

/// Ordered scan geometry with optional per-point scan-line ids and normals.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<Point3>,
    pub line_index: Option<Vec<u32>>,
    pub normals: Option<Vec<Vector3>>,
    pub meta: CloudMeta,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>) -> Self {
        Self {
            points,
            ..Self::default()
        }
    }

    pub fn with_lines(points: Vec<Point3>, line_index: Vec<u32>) -> Result<Self> {
        let cloud = Self {
            points,
            line_index: Some(line_index),
            ..Self::default()
        };
        cloud.validate()?;
        Ok(cloud)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Checks finiteness, attribute lengths, line contiguity and unit normals.
    pub fn validate(&self) -> Result<()> {
        if let Some(i) = self
            .points
            .iter()
            .position(|p| !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()))
        {
            return Err(GeometryError::InvalidCloud(format!(
                "point {i} has a non-finite coordinate"
            )));
        }
        if let Some(lines) = &self.line_index {
            if lines.len() != self.points.len() {
                return Err(GeometryError::InvalidCloud(format!(
                    "line_index has {} entries for {} points",
                    lines.len(),
                    self.points.len()
                )));
            }
            let mut seen = std::collections::HashSet::new();
            let mut prev = None;
            for &id in lines {
                if prev != Some(id) {
                    if !seen.insert(id) {
                        return Err(GeometryError::InvalidCloud(format!(
                            "points of scan line {id} are not stored consecutively"
                        )));
                    }
                    prev = Some(id);
                }
            }
        }
        if let Some(normals) = &self.normals {
            if normals.len() != self.points.len() {
                return Err(GeometryError::InvalidCloud(format!(
                    "{} normals for {} points",
                    normals.len(),
                    self.points.len()
                )));
            }
            if let Some(i) = normals
                .iter()
                .position(|n| (n.norm() - 1.0).abs() > crate::NORMAL_TOLERANCE)
            {
                return Err(GeometryError::InvalidCloud(format!(
                    "normal {i} is not unit length"
                )));
            }
        }
        Ok(())
    }

    /// Contiguous runs of each scan line, in storage order.
    pub fn lines(&self) -> Option<Vec<(u32, Range<usize>)>> {
        let ids = self.line_index.as_ref()?;
        let mut runs = Vec::new();
        let mut start = 0;
        for i in 1..=ids.len() {
            if i == ids.len() || ids[i] != ids[start] {
                runs.push((ids[start], start..i));
                start = i;
            }
        }
        Some(runs)
    }

    /// Subset of the cloud in the given order, carrying line ids and normals along.
    pub fn select(&self, ids: &[usize]) -> Self {
        Self {
            points: ids.iter().map(|&i| self.points[i]).collect(),
            line_index: self
                .line_index
                .as_ref()
                .map(|l| ids.iter().map(|&i| l[i]).collect()),
            normals: self
                .normals
                .as_ref()
                .map(|n| ids.iter().map(|&i| n[i]).collect()),
            meta: self.meta.clone(),
        }
    }

    pub fn centroid(&self) -> Option<Point3> {
        if self.points.is_empty() {
            return None;
        }
        let sum = self
            .points
            .iter()
            .fold(Vector3::zeros(), |acc, p| acc + p.coords);
        Some(Point3::from(sum / self.points.len() as f64))
    }

    pub fn bounds(&self) -> Option<Aabb> {
        let first = *self.points.first()?;
        let (min, max) = self.points.iter().fold((first, first), |(lo, hi), p| {
            (lo.inf(p), hi.sup(p))
        });
        Some(Aabb { min, max })
    }
}

/// Axis-aligned box, used as a crop volume.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Point3,
    pub max: Point3,
}

impl Aabb {
    pub fn new(min: Point3, max: Point3) -> Result<Self> {
        if min.x <= max.x && min.y <= max.y && min.z <= max.z {
            Ok(Self { min, max })
        } else {
            Err(GeometryError::InvalidParameter(format!(
                "box min {min} exceeds max {max}"
            )))
        }
    }

    pub fn contains(&self, p: &Point3) -> bool {
        self.min.x <= p.x
            && p.x <= self.max.x
            && self.min.y <= p.y
            && p.y <= self.max.y
            && self.min.z <= p.z
            && p.z <= self.max.z
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Point3>) -> Option<Self> {
        let mut iter = points.into_iter();
        let first = *iter.next()?;
        let (min, max) = iter.fold((first, first), |(lo, hi), p| (lo.inf(p), hi.sup(p)));
        Some(Self { min, max })
    }
}
