use std::fmt;
use std::sync::OnceLock;

use rayon::prelude::*;
use serde_json::{json, Value};

use super::index::{greedy_net, FlatCoords, KdTree};
use crate::error::{GeoError, Result};
use crate::geometry::metric::raw_dist;
use crate::geometry::{Point, SpaceDescriptor};

/// Finite, deduplicated, insertion-ordered set of points of one space.
pub struct PointCloud {
    space: SpaceDescriptor,
    points: Vec<Point>,
    dedup_eps: f64,
    index: OnceLock<KdTree>,
}

impl Clone for PointCloud {
    fn clone(&self) -> Self {
        PointCloud {
            space: self.space.clone(),
            points: self.points.clone(),
            dedup_eps: self.dedup_eps,
            index: OnceLock::new(),
        }
    }
}

impl PartialEq for PointCloud {
    fn eq(&self, other: &Self) -> bool {
        self.space == other.space && self.dedup_eps == other.dedup_eps && self.points == other.points
    }
}

impl fmt::Debug for PointCloud {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PointCloud")
            .field("space", &self.space.to_string())
            .field("len", &self.points.len())
            .field("dedup_eps", &self.dedup_eps)
            .finish()
    }
}

fn check_eps(dedup_eps: f64) -> Result<()> {
    if dedup_eps > 0.0 && dedup_eps.is_finite() {
        Ok(())
    } else {
        Err(GeoError::OutOfRange { what: "dedup_eps", value: dedup_eps })
    }
}

/// Indices of the first occurrences, merging any point within `eps` of an earlier kept one.
pub(crate) fn dedup_indices(points: &[Point], eps: f64) -> Vec<usize> {
    let flat = FlatCoords::new(points);
    greedy_net(points, &flat, &[], 0..points.len(), eps, usize::MAX).expect("unbounded net")
}

impl PointCloud {
    /// Validates every point against `space` and merges points closer than `dedup_eps`,
    /// keeping the first occurrence.
    pub fn new(space: SpaceDescriptor, points: Vec<Point>, dedup_eps: f64) -> Result<Self> {
        space.validate()?;
        check_eps(dedup_eps)?;
        for p in &points {
            space.check_point(p)?;
        }
        let keep = dedup_indices(&points, dedup_eps);
        let points = if keep.len() == points.len() {
            points
        } else {
            let mut slots: Vec<Option<Point>> = points.into_iter().map(Some).collect();
            keep.into_iter().map(|i| slots[i].take().expect("unique index")).collect()
        };
        Ok(Self::from_unique(space, points, dedup_eps))
    }

    pub fn empty(space: SpaceDescriptor, dedup_eps: f64) -> Result<Self> {
        space.validate()?;
        check_eps(dedup_eps)?;
        Ok(Self::from_unique(space, Vec::new(), dedup_eps))
    }

    /// Trusted constructor: points are already validated and deduplicated.
    pub(crate) fn from_unique(space: SpaceDescriptor, points: Vec<Point>, dedup_eps: f64) -> Self {
        PointCloud { space, points, dedup_eps, index: OnceLock::new() }
    }

    pub fn space(&self) -> &SpaceDescriptor {
        &self.space
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Point> {
        self.points
    }

    pub fn dedup_eps(&self) -> f64 {
        self.dedup_eps
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn index(&self) -> &KdTree {
        self.index.get_or_init(|| KdTree::build(&self.points))
    }

    /// Index and distance of the nearest cloud point (lowest index on ties).
    pub(crate) fn nearest_raw(&self, x: &Point) -> Option<(usize, f64)> {
        self.index().nearest(&self.points, x)
    }

    pub fn nearest(&self, x: &Point) -> Result<Option<(usize, f64)>> {
        self.space.check_point(x)?;
        Ok(self.nearest_raw(x))
    }

    /// Distance from `x` to the cloud; infinite for an empty cloud.
    pub fn distance_to(&self, x: &Point) -> Result<f64> {
        Ok(self.nearest(x)?.map_or(f64::INFINITY, |(_, d)| d))
    }

    /// `x` lies within `tol` of some cloud point.
    pub fn contains(&self, x: &Point, tol: f64) -> Result<bool> {
        Ok(self.distance_to(x)? <= tol)
    }

    fn check_same_space(&self, other: &PointCloud) -> Result<()> {
        if self.space == other.space {
            Ok(())
        } else {
            Err(GeoError::KindMismatch { expected: self.space.to_string(), found: other.space.to_string() })
        }
    }

    /// Every point of `self` is within `tol` of `other`.
    pub fn is_subset_of(&self, other: &PointCloud, tol: f64) -> Result<bool> {
        self.check_same_space(other)?;
        if self.is_empty() {
            return Ok(true);
        }
        if other.is_empty() {
            return Ok(false);
        }
        Ok(directed_hausdorff(self, other) <= tol)
    }

    /// Union in insertion order (`self` first), deduplicated with `self`'s radius.
    pub fn union(&self, other: &PointCloud) -> Result<PointCloud> {
        self.check_same_space(other)?;
        let mut pts = self.points.clone();
        pts.extend(other.points.iter().cloned());
        PointCloud::new(self.space.clone(), pts, self.dedup_eps)
    }

    /// Points of `self` within `tol` of `other`.
    pub fn intersection(&self, other: &PointCloud, tol: f64) -> Result<PointCloud> {
        self.check_same_space(other)?;
        let pts = self
            .points
            .iter()
            .filter(|p| other.nearest_raw(p).is_some_and(|(_, d)| d <= tol))
            .cloned()
            .collect();
        Ok(PointCloud::from_unique(self.space.clone(), pts, self.dedup_eps))
    }

    /// Applies `f` to every point and re-deduplicates.
    pub fn try_map(&self, space: SpaceDescriptor, f: impl Fn(&Point) -> Result<Point>) -> Result<PointCloud> {
        let pts = self.points.iter().map(f).collect::<Result<Vec<_>>>()?;
        PointCloud::new(space, pts, self.dedup_eps)
    }

    /// Largest pairwise distance (exact, quadratic).
    pub fn diameter(&self) -> f64 {
        let pts = &self.points;
        (0..pts.len())
            .into_par_iter()
            .map(|i| pts[i + 1..].iter().map(|q| raw_dist(&pts[i], q)).fold(0.0, f64::max))
            .reduce(|| 0.0, f64::max)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "space": serde_json::to_value(&self.space).expect("space serializes"),
            "points": self.points.iter().map(Point::to_json).collect::<Vec<_>>(),
        })
    }

    /// Parses `{"space": {...}, "points": [...]}`; an optional `"dedup_eps"` field overrides
    /// the supplied default.
    pub fn from_json(value: &Value, default_dedup_eps: f64) -> Result<PointCloud> {
        let space: SpaceDescriptor = serde_json::from_value(
            value.get("space").cloned().ok_or_else(|| GeoError::Parse("missing \"space\"".into()))?,
        )
        .map_err(|e| GeoError::Parse(format!("bad space descriptor: {e}")))?;
        space.validate()?;
        let raw = value
            .get("points")
            .and_then(Value::as_array)
            .ok_or_else(|| GeoError::Parse("missing \"points\" array".into()))?;
        let points = raw.iter().map(|v| Point::from_json(&space, v)).collect::<Result<Vec<_>>>()?;
        let eps = value.get("dedup_eps").and_then(Value::as_f64).unwrap_or(default_dedup_eps);
        PointCloud::new(space, points, eps)
    }
}

/// `max_{a in A} min_{b in B} d(a, b)` for nonempty clouds.
pub(crate) fn directed_hausdorff(a: &PointCloud, b: &PointCloud) -> f64 {
    a.points
        .par_iter()
        .map(|p| b.nearest_raw(p).map_or(f64::INFINITY, |(_, d)| d))
        .reduce(|| 0.0, f64::max)
}

/// Hausdorff distance between two nonempty clouds of the same space.
pub fn hausdorff(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    a.check_same_space(b)?;
    if a.is_empty() || b.is_empty() {
        return Err(GeoError::EmptyCloud);
    }
    Ok(directed_hausdorff(a, b).max(directed_hausdorff(b, a)))
}
