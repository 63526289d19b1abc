//! Randomized certificates for the metric, geodesic and CAT(0) properties of a space.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use super::metric::{raw_cat0_defect, raw_dist, raw_interpolate};
use super::point::Point;
use super::space::SpaceDescriptor;
use crate::error::{GeoError, Result};

/// Half-width of the sampling box used by the randomized checks.
pub const DEFAULT_SAMPLE_RADIUS: f64 = 10.0;

/// A sampled `(x, y, z, t)` configuration together with its defect.
#[derive(Debug, Clone, PartialEq)]
pub struct DefectWitness {
    pub x: Point,
    pub y: Point,
    pub z: Point,
    pub t: f64,
    pub defect: f64,
}

impl DefectWitness {
    pub fn to_json(&self) -> Value {
        json!({
            "x": self.x.to_json(),
            "y": self.y.to_json(),
            "z": self.z.to_json(),
            "t": self.t,
            "defect": self.defect,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FlatVerdict {
    Flat { max_abs_defect: f64 },
    NotFlat(DefectWitness),
}

impl FlatVerdict {
    pub fn is_flat(&self) -> bool {
        matches!(self, FlatVerdict::Flat { .. })
    }
}

fn sample_quadruple(space: &SpaceDescriptor, rng: &mut ChaCha8Rng, radius: f64) -> (Point, Point, Point, f64) {
    let x = space.sample_point(rng, radius);
    let y = space.sample_point(rng, radius);
    let z = space.sample_point(rng, radius);
    let t = rng.random_range(0.0..=1.0);
    (x, y, z, t)
}

/// Samples `n_samples` quadruples and reports `flat` iff every `|defect| <= tol`.
///
/// On failure the witness is the sample with the largest defect.
pub fn is_flat_sample(space: &SpaceDescriptor, n_samples: usize, seed: u64, tol: f64) -> Result<FlatVerdict> {
    is_flat_sample_in(space, n_samples, seed, tol, DEFAULT_SAMPLE_RADIUS)
}

pub fn is_flat_sample_in(
    space: &SpaceDescriptor,
    n_samples: usize,
    seed: u64,
    tol: f64,
    radius: f64,
) -> Result<FlatVerdict> {
    space.validate()?;
    if n_samples == 0 {
        return Err(GeoError::InvalidInput("n_samples must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_abs = 0.0f64;
    let mut worst: Option<DefectWitness> = None;
    for _ in 0..n_samples {
        let (x, y, z, t) = sample_quadruple(space, &mut rng, radius);
        let defect = raw_cat0_defect(&x, &y, &z, t);
        if defect.abs() > max_abs {
            max_abs = defect.abs();
            worst = Some(DefectWitness { x, y, z, t, defect });
        }
    }
    match worst {
        Some(w) if max_abs > tol => Ok(FlatVerdict::NotFlat(w)),
        _ => Ok(FlatVerdict::Flat { max_abs_defect: max_abs }),
    }
}

/// Summary of the randomized invariant suite run by `cat0 check`.
#[derive(Debug, Clone, Serialize)]
pub struct SpaceCheckReport {
    pub space: String,
    pub trials: usize,
    pub seed: u64,
    pub tol: f64,
    /// Largest `|d(x,y) - d(y,x)|`.
    pub max_symmetry_error: f64,
    /// Smallest sampled distance between distinct draws (must be nonnegative).
    pub min_distance: f64,
    /// Largest `d(x,z) - d(x,y) - d(y,z)`; nonpositive when the triangle inequality holds.
    pub max_triangle_excess: f64,
    /// Largest `|d(x_s, x_t) - |s - t| d(x,y)|`.
    pub max_geodesic_error: f64,
    /// Largest `d(x_t, y_{1-t})` where `y_{1-t}` walks the reversed geodesic.
    pub max_reversal_error: f64,
    pub min_defect: f64,
    pub max_abs_defect: f64,
    pub flat: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flatness_witness: Option<Value>,
    pub passed: bool,
}

/// Runs metric-axiom, geodesic-parameterization and CAT(0)-defect checks on random samples.
///
/// `passed` covers the properties every shipped space must satisfy; flatness is reported
/// but is not a failure.
pub fn check_space(space: &SpaceDescriptor, trials: usize, seed: u64, tol: f64) -> Result<SpaceCheckReport> {
    space.validate()?;
    if trials == 0 {
        return Err(GeoError::InvalidInput("trials must be >= 1".into()));
    }
    if tol.is_nan() || tol < 0.0 {
        return Err(GeoError::InvalidInput(format!("tol must be >= 0, got {tol}")));
    }
    let radius = DEFAULT_SAMPLE_RADIUS;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_sym = 0.0f64;
    let mut min_d = f64::INFINITY;
    let mut max_tri = f64::NEG_INFINITY;
    let mut max_geo = 0.0f64;
    let mut max_rev = 0.0f64;
    let mut min_defect = f64::INFINITY;
    let mut max_abs_defect = 0.0f64;
    let mut worst: Option<DefectWitness> = None;

    for _ in 0..trials {
        let (x, y, z, t) = sample_quadruple(space, &mut rng, radius);
        let dxy = raw_dist(&x, &y);
        let dyx = raw_dist(&y, &x);
        let dyz = raw_dist(&y, &z);
        let dxz = raw_dist(&x, &z);
        max_sym = max_sym.max((dxy - dyx).abs());
        min_d = min_d.min(dxy).min(dyz).min(dxz);
        max_tri = max_tri.max(dxz - dxy - dyz);

        let s: f64 = rng.random_range(0.0..=1.0);
        let xs = raw_interpolate(&x, &y, s);
        let xt = raw_interpolate(&x, &y, t);
        let scale = 1.0f64.max(dxy);
        max_geo = max_geo.max((raw_dist(&xs, &xt) - (s - t).abs() * dxy).abs() / scale);
        let rev = raw_interpolate(&y, &x, 1.0 - t);
        max_rev = max_rev.max(raw_dist(&xt, &rev) / scale);

        let defect = raw_cat0_defect(&x, &y, &z, t);
        min_defect = min_defect.min(defect);
        if defect.abs() > max_abs_defect {
            max_abs_defect = defect.abs();
            worst = Some(DefectWitness { x, y, z, t, defect });
        }
    }
    let flat = max_abs_defect <= tol;
    // rounding floor scales with radius^2
    let defect_floor = -tol.max(1e-15 * radius * radius);
    let passed = max_sym <= 1e-12 && min_d >= 0.0 && max_tri <= 1e-9 && max_geo <= 1e-9 && max_rev <= 1e-9
        && min_defect >= defect_floor;
    Ok(SpaceCheckReport {
        space: space.to_string(),
        trials,
        seed,
        tol,
        max_symmetry_error: max_sym,
        min_distance: min_d,
        max_triangle_excess: max_tri,
        max_geodesic_error: max_geo,
        max_reversal_error: max_rev,
        min_defect,
        max_abs_defect,
        flat,
        flatness_witness: if flat { None } else { worst.map(|w| w.to_json()) },
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn euclidean_is_flat() {
        let v = is_flat_sample(&SpaceDescriptor::Euclidean { dim: 3 }, 10_000, 1, 1e-9).unwrap();
        assert!(v.is_flat(), "{v:?}");
    }

    #[test]
    fn product_of_lines_is_flat() {
        let space: SpaceDescriptor = "product(euclidean:1,euclidean:1)".parse().unwrap();
        assert!(is_flat_sample(&space, 10_000, 2, 1e-9).unwrap().is_flat());
    }

    #[test]
    fn biquadrant_is_not_flat() {
        match is_flat_sample(&SpaceDescriptor::Biquadrant, 10_000, 3, 1e-6).unwrap() {
            FlatVerdict::NotFlat(w) => {
                assert!(w.defect > 1e-6);
                assert!((raw_cat0_defect(&w.x, &w.y, &w.z, w.t) - w.defect).abs() < 1e-12);
            }
            other => panic!("expected a witness, got {other:?}"),
        }
    }

    #[test]
    fn zero_samples_rejected() {
        assert!(is_flat_sample(&SpaceDescriptor::Biquadrant, 0, 0, 1e-9).is_err());
    }

    #[test]
    fn check_suite_passes_on_all_spaces() {
        for spec in ["euclidean:2", "biquadrant", "product(biquadrant,euclidean:1)"] {
            let space: SpaceDescriptor = spec.parse().unwrap();
            let r = check_space(&space, 2_000, 11, 1e-9).unwrap();
            assert!(r.passed, "{spec}: {r:?}");
        }
    }
}
