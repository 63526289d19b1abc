//! Checks of the algebraic laws of threading: intersection and union rules, isometry
//! equivariance and the product rule.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use super::cloud::{hausdorff, PointCloud};
use super::ops::{estimate_degree, member_thr1, stabilizing_chain, threading_chain, ThreadingParams};
use crate::error::{GeoError, Result};
use crate::geometry::metric::{raw_dist, raw_interpolate};
use crate::geometry::{Isometry, Point, SpaceDescriptor};

/// Violations kept in a verdict; the count is always exact.
const MAX_REPORTED: usize = 16;

/// Points of `thr S`: `S` itself, every pairwise midpoint and `n_random` random segment points.
pub fn sample_thr1(cloud: &PointCloud, n_random: usize, rng: &mut impl Rng) -> Vec<Point> {
    let pts = cloud.points();
    let mut out = pts.to_vec();
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            out.push(raw_interpolate(&pts[i], &pts[j], 0.5));
        }
    }
    if !pts.is_empty() {
        for _ in 0..n_random {
            let i = rng.random_range(0..pts.len());
            let j = rng.random_range(0..pts.len());
            let t = rng.random_range(0.0..=1.0);
            out.push(raw_interpolate(&pts[i], &pts[j], t));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LawViolation {
    pub clause: &'static str,
    pub point: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlgebraVerdict {
    pub passed: bool,
    /// Membership queries evaluated.
    pub checked: usize,
    pub violation_count: usize,
    pub violations: Vec<LawViolation>,
    /// `S1` is contained in `S2`, so the equality clauses were checked too.
    pub nested: bool,
    /// A point of `thr S1 ∩ thr S2` outside `thr(S1 ∩ S2)`, if one was sampled.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub intersection_strict: Option<Value>,
    /// A point of `thr(S1 ∪ S2)` outside `thr S1 ∪ thr S2`, if one was sampled.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub union_strict: Option<Value>,
}

struct Tally {
    checked: usize,
    violations: Vec<LawViolation>,
    count: usize,
}

impl Tally {
    fn expect(&mut self, clause: &'static str, z: &Point, holds: bool) {
        self.checked += 1;
        if !holds {
            self.count += 1;
            if self.violations.len() < MAX_REPORTED {
                self.violations.push(LawViolation { clause, point: z.to_json() });
            }
        }
    }
}

/// Tests `thr(S1 ∩ S2) ⊆ thr S1 ∩ thr S2` and `thr S1 ∪ thr S2 ⊆ thr(S1 ∪ S2)` with
/// [`member_thr1`] as the oracle, plus equality and monotonicity when `S1 ⊆ S2`.
///
/// Intersections and containment of the finite sets are taken at `tol`.
pub fn thread_algebra_check(s1: &PointCloud, s2: &PointCloud, n_samples: usize, seed: u64, tol: f64) -> Result<AlgebraVerdict> {
    if s1.space() != s2.space() {
        return Err(GeoError::KindMismatch { expected: s1.space().to_string(), found: s2.space().to_string() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inter = s1.intersection(s2, tol)?;
    let union = s1.union(s2)?;
    let nested = s1.is_subset_of(s2, tol)?;
    let member = |c: &PointCloud, z: &Point| member_thr1(c, z, tol);

    let mut t = Tally { checked: 0, violations: Vec::new(), count: 0 };
    let thr_i = sample_thr1(&inter, n_samples, &mut rng);
    let thr_1 = sample_thr1(s1, n_samples, &mut rng);
    let thr_2 = sample_thr1(s2, n_samples, &mut rng);
    let thr_u = sample_thr1(&union, n_samples, &mut rng);

    for z in &thr_i {
        t.expect("thr(S1∩S2) ⊆ thr S1", z, member(s1, z)?);
        t.expect("thr(S1∩S2) ⊆ thr S2", z, member(s2, z)?);
    }
    for z in thr_1.iter().chain(&thr_2) {
        t.expect("thr S1 ∪ thr S2 ⊆ thr(S1∪S2)", z, member(&union, z)?);
    }

    let mut intersection_strict = None;
    for z in thr_1.iter().chain(&thr_2) {
        if member(s1, z)? && member(s2, z)? && !member(&inter, z)? {
            intersection_strict = Some(z.to_json());
            break;
        }
    }
    let mut union_strict = None;
    for z in &thr_u {
        if !member(s1, z)? && !member(s2, z)? {
            union_strict = Some(z.to_json());
            break;
        }
    }

    if nested {
        for z in &thr_1 {
            t.expect("S1 ⊆ S2 ⟹ thr S1 ⊆ thr S2", z, member(s2, z)?);
            // thr S1 ∩ thr S2 = thr S1 here, so equality means thr S1 ⊆ thr(S1∩S2)
            t.expect("S1 ⊆ S2 ⟹ thr S1 ∩ thr S2 ⊆ thr(S1∩S2)", z, member(&inter, z)?);
        }
        for z in &thr_u {
            t.expect("S1 ⊆ S2 ⟹ thr(S1∪S2) ⊆ thr S1 ∪ thr S2", z, member(s1, z)? || member(s2, z)?);
        }
    }

    Ok(AlgebraVerdict {
        passed: t.count == 0,
        checked: t.checked,
        violation_count: t.count,
        violations: t.violations,
        nested,
        intersection_strict,
        union_strict,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivarianceVerdict {
    /// `d_H(Φ(thr^n S), thr^n Φ(S))` for `n = 0..=n_iters`.
    pub gaps: Vec<f64>,
    pub max_gap: f64,
    pub tol: f64,
    pub passed: bool,
}

/// Compares `Φ(thr^n S)` with `thr^n Φ(S)` under identical discretization parameters.
pub fn equivariance_check(
    cloud: &PointCloud,
    phi: &Isometry,
    n_iters: usize,
    params: &ThreadingParams,
    tol: f64,
) -> Result<EquivarianceVerdict> {
    phi.check_space(cloud.space())?;
    let image = cloud.try_map(cloud.space().clone(), |p| phi.apply(p))?;
    let (direct, _) = threading_chain(cloud, n_iters, params)?;
    let (moved, _) = threading_chain(&image, n_iters, params)?;
    let gaps = direct
        .iter()
        .zip(&moved)
        .map(|(a, b)| hausdorff(&a.try_map(a.space().clone(), |p| phi.apply(p))?, b))
        .collect::<Result<Vec<_>>>()?;
    let max_gap = gaps.iter().copied().fold(0.0, f64::max);
    Ok(EquivarianceVerdict { gaps, max_gap, tol, passed: max_gap <= tol })
}

/// `S1 × S2` as a cloud of the product space.
pub fn product_cloud(s1: &PointCloud, s2: &PointCloud) -> Result<PointCloud> {
    let space = SpaceDescriptor::product(s1.space().clone(), s2.space().clone());
    let pts = s1
        .points()
        .iter()
        .flat_map(|a| s2.points().iter().map(move |b| Point::product(a.clone(), b.clone())))
        .collect();
    PointCloud::new(space, pts, s1.dedup_eps().min(s2.dedup_eps()))
}

/// Above this many pairs the `A × B → C` direction is estimated from a seeded sample.
const PRODUCT_EXHAUSTIVE_LIMIT: usize = 250_000;
const PRODUCT_SAMPLES: usize = 100_000;

fn split(p: &Point) -> (&Point, &Point) {
    match p {
        Point::Product(pair) => (&pair.0, &pair.1),
        _ => unreachable!("product cloud holds product points"),
    }
}

/// Hausdorff distance between a product-space cloud `c` and `a × b`, without building `a × b`.
///
/// Returns the distance and whether the `a × b` side was sampled.
pub fn hausdorff_to_product(c: &PointCloud, a: &PointCloud, b: &PointCloud, seed: u64) -> Result<(f64, bool)> {
    let expected = SpaceDescriptor::product(a.space().clone(), b.space().clone());
    if c.space() != &expected {
        return Err(GeoError::KindMismatch { expected: expected.to_string(), found: c.space().to_string() });
    }
    if c.is_empty() || a.is_empty() || b.is_empty() {
        return Err(GeoError::EmptyCloud);
    }
    // d((p, q), A × B)^2 = d(p, A)^2 + d(q, B)^2
    let forward = c
        .points()
        .par_iter()
        .map(|p| {
            let (l, r) = split(p);
            let dl = a.nearest_raw(l).map_or(f64::INFINITY, |x| x.1);
            let dr = b.nearest_raw(r).map_or(f64::INFINITY, |x| x.1);
            dl.hypot(dr)
        })
        .reduce(|| 0.0, f64::max);
    let total = a.len().saturating_mul(b.len());
    let sampled = total > PRODUCT_EXHAUSTIVE_LIMIT;
    let pairs: Vec<(usize, usize)> = if sampled {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..PRODUCT_SAMPLES).map(|_| (rng.random_range(0..a.len()), rng.random_range(0..b.len()))).collect()
    } else {
        (0..a.len()).flat_map(|i| (0..b.len()).map(move |j| (i, j))).collect()
    };
    let backward = pairs
        .par_iter()
        .map(|&(i, j)| {
            let q = Point::product(a.points()[i].clone(), b.points()[j].clone());
            c.nearest_raw(&q).map_or(f64::INFINITY, |x| x.1)
        })
        .reduce(|| 0.0, f64::max);
    Ok((forward.max(backward), sampled))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProductIteration {
    pub n: usize,
    /// `d_H(thr^n(S1 × S2), thr^n S1 × thr^n S2)` on the clouds.
    pub gap: f64,
    pub sampled: bool,
    pub within_tol: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProductRuleVerdict {
    pub degree_left: Option<usize>,
    pub degree_right: Option<usize>,
    pub degree_product: Option<usize>,
    /// `deg(S1 × S2) = max(deg S1, deg S2)`.
    pub degree_rule_holds: bool,
    pub iterations: Vec<ProductIteration>,
    /// Twice the grid resolution of the product set.
    pub tol: f64,
    pub iterations_hold: bool,
    pub passed: bool,
}

/// Compares threading of a product set with the product of the factor threadings, per
/// iteration and through the degree estimates.
pub fn product_rule_check(
    s1: &PointCloud,
    s2: &PointCloud,
    eps: f64,
    n_max: usize,
    params: &ThreadingParams,
) -> Result<ProductRuleVerdict> {
    let s = product_cloud(s1, s2)?;
    let left = estimate_degree(s1, eps, n_max, params)?;
    let right = estimate_degree(s2, eps, n_max, params)?;
    let (chain, report) = stabilizing_chain(&s, eps, n_max, params)?;
    let degree_product = report.stabilized_at.map(|n| n - 1);
    let n_iters = chain.len() - 1;
    let (c1, _) = threading_chain(s1, n_iters, params)?;
    let (c2, _) = threading_chain(s2, n_iters, params)?;
    let tol = 2.0 * params.grid_resolution(s.diameter());

    let mut iterations = Vec::with_capacity(n_iters);
    for n in 1..=n_iters {
        let (gap, sampled) = hausdorff_to_product(&chain[n], &c1[n], &c2[n], params.seed ^ n as u64)?;
        iterations.push(ProductIteration { n, gap, sampled, within_tol: gap <= tol });
    }
    let degree_rule_holds = match (left.degree, right.degree, degree_product) {
        (Some(l), Some(r), Some(p)) => p == l.max(r),
        _ => false,
    };
    let iterations_hold = iterations.iter().all(|it| it.within_tol);
    Ok(ProductRuleVerdict {
        degree_left: left.degree,
        degree_right: right.degree,
        degree_product,
        degree_rule_holds,
        iterations,
        tol,
        iterations_hold,
        passed: degree_rule_holds && iterations_hold,
    })
}

/// Largest distance from a point of `a` to the geodesic segments of `b` (used by tests that
/// compare clouds with exact `thr b`).
pub fn excess_over_thr1(a: &PointCloud, b: &PointCloud) -> f64 {
    let pts = b.points();
    a.points()
        .par_iter()
        .map(|z| {
            let mut best = f64::INFINITY;
            for i in 0..pts.len() {
                best = best.min(raw_dist(&pts[i], z));
                for y in &pts[i + 1..] {
                    best = best.min(segment_distance(&pts[i], y, z));
                }
            }
            best
        })
        .reduce(|| 0.0, f64::max)
}

/// Distance from `z` to the geodesic `[x, y]`, by golden-section search on the (convex)
/// distance along the segment.
pub fn segment_distance(x: &Point, y: &Point, z: &Point) -> f64 {
    let f = |t: f64| raw_dist(&raw_interpolate(x, y, t), z);
    crate::frechet::golden_section(f, 0.0, 1.0, 1e-12).1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Quadrant;

    fn e1(xs: &[f64]) -> PointCloud {
        PointCloud::new(SpaceDescriptor::Euclidean { dim: 1 }, xs.iter().map(|&x| Point::euclidean([x])).collect(), 1e-6)
            .unwrap()
    }

    #[test]
    fn intersection_counterexample() {
        let v = thread_algebra_check(&e1(&[0.0, 2.0]), &e1(&[1.0]), 50, 1, 1e-9).unwrap();
        assert!(v.passed, "{v:?}");
        assert_eq!(v.intersection_strict, Some(Point::euclidean([1.0]).to_json()));
    }

    #[test]
    fn union_counterexample() {
        let v = thread_algebra_check(&e1(&[0.0, 2.0]), &e1(&[3.0]), 50, 1, 1e-9).unwrap();
        assert!(v.passed, "{v:?}");
        assert_eq!(v.union_strict, Some(Point::euclidean([2.5]).to_json()));
        assert!(v.intersection_strict.is_none());
    }

    #[test]
    fn nested_sets_satisfy_equalities() {
        let v = thread_algebra_check(&e1(&[0.0, 1.0]), &e1(&[0.0, 1.0, 4.0]), 50, 2, 1e-9).unwrap();
        assert!(v.nested && v.passed, "{v:?}");
        assert!(v.intersection_strict.is_none() && v.union_strict.is_none());
    }

    #[test]
    fn identity_isometry_has_zero_gap() {
        let s = PointCloud::new(
            SpaceDescriptor::Biquadrant,
            vec![Point::biquadrant(Quadrant::Plus, 1.0, 0.0).unwrap(), Point::biquadrant(Quadrant::Minus, 0.0, -2.0).unwrap()],
            1e-6,
        )
        .unwrap();
        let p = ThreadingParams { grid_k: 9, ..Default::default() };
        let v = equivariance_check(&s, &Isometry::Identity, 2, &p, 0.0).unwrap();
        assert!(v.passed);
        assert_eq!(v.gaps, vec![0.0; 3]);
        let v = equivariance_check(&s, &Isometry::BiquadrantSwap, 2, &p, 1e-9).unwrap();
        assert!(v.passed, "{v:?}");
    }

    #[test]
    fn singleton_factors() {
        let p = ThreadingParams::default();
        let v = product_rule_check(&e1(&[1.0]), &e1(&[-2.0]), 1e-2, 4, &p).unwrap();
        assert_eq!(v.degree_product, Some(0));
        assert!(v.passed, "{v:?}");
        assert_eq!(product_cloud(&e1(&[1.0]), &e1(&[-2.0])).unwrap().len(), 1);
    }

    #[test]
    fn separable_distance_matches_materialized_product() {
        let a = e1(&[0.0, 1.0, 2.5]);
        let b = e1(&[-1.0, 0.5]);
        let c = product_cloud(&e1(&[0.2, 3.0]), &e1(&[0.0])).unwrap();
        let ab = product_cloud(&a, &b).unwrap();
        let (d, sampled) = hausdorff_to_product(&c, &a, &b, 0).unwrap();
        assert!(!sampled);
        assert!((d - hausdorff(&c, &ab).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn segment_distance_broken_geodesic() {
        let x = Point::biquadrant(Quadrant::Plus, 1.0, 0.0).unwrap();
        let y = Point::biquadrant(Quadrant::Minus, 0.0, -1.0).unwrap();
        let z = Point::biquadrant(Quadrant::Plus, 0.0, 1.0).unwrap();
        assert!((segment_distance(&x, &y, &z) - 1.0).abs() < 1e-9);
    }
}
