//! Distances, geodesic interpolation and the CAT(0) comparison defect.
//!
//! The checked entry points validate membership against a [`SpaceDescriptor`]; the
//! `raw_*` variants assume both points already belong to the same space and are what the
//! hot loops in the threading code call.

use super::point::{Point, Quadrant};
use super::space::SpaceDescriptor;
use crate::error::{GeoError, Result};

/// Geodesic distance between two points of `space`.
pub fn dist(space: &SpaceDescriptor, x: &Point, y: &Point) -> Result<f64> {
    space.check_point(x)?;
    space.check_point(y)?;
    Ok(raw_dist(x, y))
}

/// The point `x_t` on the geodesic `[x, y]` with `d(x, x_t) = t d(x, y)`.
pub fn interpolate(space: &SpaceDescriptor, x: &Point, y: &Point, t: f64) -> Result<Point> {
    check_unit(t)?;
    space.check_point(x)?;
    space.check_point(y)?;
    Ok(raw_interpolate(x, y, t))
}

/// `(1-t) d(x,z)^2 + t d(y,z)^2 - t(1-t) d(x,y)^2 - d(x_t,z)^2`.
///
/// Nonnegative in a CAT(0) space, identically zero in a flat one.
pub fn cat0_defect(space: &SpaceDescriptor, x: &Point, y: &Point, z: &Point, t: f64) -> Result<f64> {
    check_unit(t)?;
    for p in [x, y, z] {
        space.check_point(p)?;
    }
    Ok(raw_cat0_defect(x, y, z, t))
}

fn check_unit(t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(GeoError::OutOfRange { what: "interpolation parameter t", value: t })
    }
}

fn norm2(xy: &[f64; 2]) -> f64 {
    xy[0].hypot(xy[1])
}

pub(crate) fn raw_dist(x: &Point, y: &Point) -> f64 {
    match (x, y) {
        (Point::Euclidean(a), Point::Euclidean(b)) => {
            debug_assert_eq!(a.len(), b.len());
            a.iter().zip(b.iter()).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt()
        }
        (Point::Biquadrant { quadrant: qa, xy: a }, Point::Biquadrant { quadrant: qb, xy: b }) => {
            if qa == qb {
                (a[0] - b[0]).hypot(a[1] - b[1])
            } else {
                // the only path between the quadrants runs through the glue point
                norm2(a) + norm2(b)
            }
        }
        (Point::Product(a), Point::Product(b)) => {
            let d1 = raw_dist(&a.0, &b.0);
            let d2 = raw_dist(&a.1, &b.1);
            d1.hypot(d2)
        }
        _ => {
            debug_assert!(false, "raw_dist on mismatched kinds");
            f64::NAN
        }
    }
}

pub(crate) fn raw_interpolate(x: &Point, y: &Point, t: f64) -> Point {
    if t == 0.0 {
        return x.clone();
    }
    if t == 1.0 {
        return y.clone();
    }
    match (x, y) {
        (Point::Euclidean(a), Point::Euclidean(b)) => {
            Point::Euclidean(a.iter().zip(b.iter()).map(|(u, v)| u + t * (v - u)).collect())
        }
        (Point::Biquadrant { quadrant: qa, xy: a }, Point::Biquadrant { quadrant: qb, xy: b }) => {
            if qa == qb {
                Point::biquadrant_clamped(*qa, a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]))
            } else {
                broken_segment_point(*qa, a, *qb, b, t)
            }
        }
        (Point::Product(a), Point::Product(b)) => {
            Point::product(raw_interpolate(&a.0, &b.0, t), raw_interpolate(&a.1, &b.1, t))
        }
        _ => {
            debug_assert!(false, "raw_interpolate on mismatched kinds");
            x.clone()
        }
    }
}

/// Arc-length walk along `x -> 0 -> y` for points in opposite quadrants.
fn broken_segment_point(qa: Quadrant, a: &[f64; 2], qb: Quadrant, b: &[f64; 2], t: f64) -> Point {
    let la = norm2(a);
    let lb = norm2(b);
    let s = t * (la + lb);
    if s <= la {
        if la == 0.0 {
            return Point::biquadrant_clamped(Quadrant::Plus, 0.0, 0.0);
        }
        let f = (la - s) / la;
        Point::biquadrant_clamped(qa, a[0] * f, a[1] * f)
    } else {
        let f = ((s - la) / lb).min(1.0);
        Point::biquadrant_clamped(qb, b[0] * f, b[1] * f)
    }
}

pub(crate) fn raw_cat0_defect(x: &Point, y: &Point, z: &Point, t: f64) -> f64 {
    let xt = raw_interpolate(x, y, t);
    let dxz = raw_dist(x, z);
    let dyz = raw_dist(y, z);
    let dxy = raw_dist(x, y);
    let dtz = raw_dist(&xt, z);
    (1.0 - t) * dxz * dxz + t * dyz * dyz - t * (1.0 - t) * dxy * dxy - dtz * dtz
}
