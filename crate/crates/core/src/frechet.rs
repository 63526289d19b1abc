//! Frechet objective `F_p(x) = sum_i w_i d(x, x_i)^p` for `p` in {1, 2}, mean and median
//! solvers, and hull-membership certificates.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{GeoError, Result};
use crate::geometry::metric::{raw_dist, raw_interpolate};
use crate::geometry::{Point, SpaceDescriptor};
use crate::threading::{convex_hull_cloud, PointCloud, ThreadingParams};

/// Objective values closer than this count as ties.
pub const TIE_TOL: f64 = 1e-9;
const WEIGHT_SUM_TOL: f64 = 1e-12;
const GOLDEN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct FrechetProblem {
    space: SpaceDescriptor,
    points: Vec<Point>,
    weights: Vec<f64>,
    p: u32,
}

impl FrechetProblem {
    /// Validates the points and normalizes `weights` to sum to one (uniform when `None`).
    pub fn new(space: SpaceDescriptor, points: Vec<Point>, weights: Option<Vec<f64>>, p: u32) -> Result<Self> {
        space.validate()?;
        if p != 1 && p != 2 {
            return Err(GeoError::OutOfRange { what: "p", value: p as f64 });
        }
        if points.is_empty() {
            return Err(GeoError::EmptyCloud);
        }
        for x in &points {
            space.check_point(x)?;
        }
        let n = points.len();
        let weights = weights.unwrap_or_else(|| vec![1.0; n]);
        if weights.len() != n {
            return Err(GeoError::InvalidInput(format!("{} weights for {} points", weights.len(), n)));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(GeoError::OutOfRange { what: "weight", value: *w });
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(GeoError::InvalidInput("weights must not all be zero".into()));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(FrechetProblem { space, points, weights, p })
    }

    pub fn uniform(space: SpaceDescriptor, points: Vec<Point>, p: u32) -> Result<Self> {
        Self::new(space, points, None, p)
    }

    pub fn space(&self) -> &SpaceDescriptor {
        &self.space
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    /// Same points, weights and exponent, moved into another space by `f`.
    pub fn try_map(&self, space: SpaceDescriptor, f: impl Fn(&Point) -> Result<Point>) -> Result<Self> {
        let points = self.points.iter().map(f).collect::<Result<Vec<_>>>()?;
        Self::new(space, points, Some(self.weights.clone()), self.p)
    }

    pub(crate) fn raw_objective(&self, x: &Point) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(xi, w)| {
                let d = raw_dist(x, xi);
                w * if self.p == 2 { d * d } else { d }
            })
            .sum()
    }

    pub fn objective(&self, x: &Point) -> Result<f64> {
        self.space.check_point(x)?;
        Ok(self.raw_objective(x))
    }

    /// Anchors with positive weight (the others do not affect the objective).
    fn active_points(&self) -> Vec<Point> {
        self.points.iter().zip(&self.weights).filter(|(_, w)| **w > 0.0).map(|(x, _)| x.clone()).collect()
    }

    /// Cloud of the positive-weight anchors.
    pub fn anchor_cloud(&self, dedup_eps: f64) -> Result<PointCloud> {
        PointCloud::new(self.space.clone(), self.active_points(), dedup_eps)
    }

    fn equal_weights(&self) -> bool {
        let w0 = self.weights[0];
        self.weights.iter().all(|w| (w - w0).abs() <= WEIGHT_SUM_TOL)
    }

    /// Parses `{"space", "points", "weights"?, "p"}`.
    pub fn from_json(value: &Value) -> Result<Self> {
        let space: SpaceDescriptor = serde_json::from_value(
            value.get("space").cloned().ok_or_else(|| GeoError::Parse("missing \"space\"".into()))?,
        )
        .map_err(|e| GeoError::Parse(format!("bad space descriptor: {e}")))?;
        space.validate()?;
        let points = value
            .get("points")
            .and_then(Value::as_array)
            .ok_or_else(|| GeoError::Parse("missing \"points\" array".into()))?
            .iter()
            .map(|v| Point::from_json(&space, v))
            .collect::<Result<Vec<_>>>()?;
        let weights = match value.get("weights") {
            None | Some(Value::Null) => None,
            Some(Value::Array(ws)) => Some(
                ws.iter()
                    .map(|w| w.as_f64().ok_or_else(|| GeoError::Parse(format!("weight {w} is not a number"))))
                    .collect::<Result<Vec<_>>>()?,
            ),
            Some(other) => return Err(GeoError::Parse(format!("\"weights\" must be an array, got {other}"))),
        };
        let p = match value.get("p") {
            None => 2,
            Some(v) => v.as_u64().ok_or_else(|| GeoError::Parse(format!("\"p\" must be 1 or 2, got {v}")))? as u32,
        };
        Self::new(space, points, weights, p)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "space": serde_json::to_value(&self.space).expect("space serializes"),
            "points": self.points.iter().map(Point::to_json).collect::<Vec<_>>(),
            "weights": self.weights,
            "p": self.p,
        })
    }
}

/// Distance of a candidate minimizer to the hull cloud of the anchors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub distance: f64,
    /// `eps + grid resolution`.
    pub tolerance: f64,
    pub passed: bool,
    pub hull_size: usize,
    pub hull_stabilized: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverResult {
    pub minimizer: Point,
    pub objective: f64,
    pub iterations: usize,
    pub method: &'static str,
    pub certificate: Option<Certificate>,
    /// Another candidate came within [`TIE_TOL`] of the best objective.
    pub near_tie: bool,
    /// The hull cloud did not stabilize, so accuracy is not guaranteed.
    pub degraded: bool,
}

impl SolverResult {
    pub fn to_json(&self) -> Value {
        let mut v = json!({
            "method": self.method,
            "minimizer": self.minimizer.to_json(),
            "objective": self.objective,
            "iterations": self.iterations,
            "near_tie": self.near_tie,
            "degraded": self.degraded,
        });
        if let Some(c) = &self.certificate {
            v["certificate"] = serde_json::to_value(c).expect("certificate serializes");
        }
        v
    }
}

/// Closed-form weighted mean `sum_i w_i x_i` (Euclidean space, `p = 2`).
pub fn euclidean_mean(problem: &FrechetProblem) -> Result<Point> {
    let SpaceDescriptor::Euclidean { dim } = problem.space else {
        return Err(GeoError::Unsupported(format!("closed-form mean on {}", problem.space)));
    };
    if problem.p != 2 {
        return Err(GeoError::Unsupported("closed-form mean needs p = 2".into()));
    }
    let mut acc = vec![0.0; dim];
    for (x, w) in problem.points.iter().zip(&problem.weights) {
        for (a, c) in acc.iter_mut().zip(x.coords().expect("euclidean point")) {
            *a += w * c;
        }
    }
    Ok(Point::euclidean(acc))
}

/// Anchor order for [`inductive_mean`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schedule {
    /// `x_0 = x_1`, then anchors `x_2, x_3, ..., x_n, x_1, ...` (equal weights only).
    Cycle,
    /// Start at a weighted random anchor, then draw anchors i.i.d. with probability `w_i`.
    Random,
}

/// Inductive mean: `x_k = x_{k-1}` moved a fraction `1/(k+1)` of the way toward the k-th anchor.
pub fn inductive_mean(problem: &FrechetProblem, n_iters: usize, schedule: Schedule, seed: u64) -> Result<SolverResult> {
    if problem.p != 2 {
        return Err(GeoError::Unsupported("inductive mean needs p = 2".into()));
    }
    if n_iters == 0 {
        return Err(GeoError::OutOfRange { what: "n_iters", value: 0.0 });
    }
    let pts = &problem.points;
    let n = pts.len();
    let mut x = match schedule {
        Schedule::Cycle => {
            if !problem.equal_weights() {
                return Err(GeoError::Unsupported("cyclic schedule needs equal weights".into()));
            }
            let mut x = pts[0].clone();
            for k in 1..=n_iters {
                x = raw_interpolate(&x, &pts[k % n], 1.0 / (k + 1) as f64);
            }
            x
        }
        Schedule::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let dist = WeightedIndex::new(&problem.weights).map_err(|e| GeoError::InvalidInput(e.to_string()))?;
            let mut x = pts[dist.sample(&mut rng)].clone();
            for k in 1..=n_iters {
                x = raw_interpolate(&x, &pts[dist.sample(&mut rng)], 1.0 / (k + 1) as f64);
            }
            x
        }
    };
    if problem.space.is_euclidean() {
        // keep -0.0 out of reports
        if let Point::Euclidean(c) = &mut x {
            c.iter_mut().for_each(|v| *v += 0.0);
        }
    }
    Ok(SolverResult {
        objective: problem.raw_objective(&x),
        minimizer: x,
        iterations: n_iters,
        method: match schedule {
            Schedule::Cycle => "inductive-cycle",
            Schedule::Random => "inductive-random",
        },
        certificate: None,
        near_tie: false,
        degraded: false,
    })
}

/// Minimizes a unimodal `f` on `[lo, hi]`; returns the argmin and its value.
pub fn golden_section(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    // endpoints checked separately
    [(lo, f(lo)), (hi, f(hi)), (c, fc), (d, fd)]
        .into_iter()
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .expect("nonempty")
}

/// Settings for [`threading_search_mean`].
#[derive(Debug, Clone, PartialEq)]
pub struct SearchParams {
    pub eps: f64,
    pub n_max: usize,
    pub refine_steps: usize,
    pub threading: ThreadingParams,
}

impl Default for SearchParams {
    fn default() -> Self {
        SearchParams {
            eps: crate::config::DEFAULT_EPS,
            n_max: crate::config::DEFAULT_N_MAX,
            refine_steps: crate::config::DEFAULT_REFINE_STEPS,
            threading: ThreadingParams::default(),
        }
    }
}

fn hull_tolerance(anchors: &PointCloud, eps: f64, params: &ThreadingParams) -> f64 {
    eps + params.grid_resolution(anchors.diameter())
}

/// Minimizes `F_p` over the hull cloud of the anchors, then refines by golden-section
/// searches along the geodesics toward each anchor.
pub fn threading_search_mean(problem: &FrechetProblem, search: &SearchParams) -> Result<SolverResult> {
    let anchors = problem.anchor_cloud(search.threading.dedup_eps)?;
    let (hull, report) = convex_hull_cloud(&anchors, search.eps, search.n_max, &search.threading)?;
    let values: Vec<f64> = hull.points().par_iter().map(|x| problem.raw_objective(x)).collect();
    let (best_idx, best_val) = values
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
    let near_tie = values.iter().enumerate().any(|(i, &v)| i != best_idx && v <= best_val + TIE_TOL);

    let mut x = hull.points()[best_idx].clone();
    let mut fx = best_val;
    let mut iterations = 0;
    for _ in 0..search.refine_steps {
        let mut improved = false;
        for a in anchors.points() {
            iterations += 1;
            let (t, ft) = golden_section(|t| problem.raw_objective(&raw_interpolate(&x, a, t)), 0.0, 1.0, GOLDEN_TOL);
            if ft < fx {
                x = raw_interpolate(&x, a, t);
                fx = ft;
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }

    let distance = hull.distance_to(&x)?;
    let tolerance = hull_tolerance(&anchors, search.eps, &search.threading);
    let certificate = Certificate {
        distance,
        tolerance,
        passed: distance <= tolerance,
        hull_size: hull.len(),
        hull_stabilized: report.stabilized,
    };
    Ok(SolverResult {
        objective: problem.raw_objective(&x),
        minimizer: x,
        iterations,
        method: if problem.p == 2 { "threading-search-mean" } else { "threading-search-median" },
        certificate: Some(certificate),
        near_tie,
        degraded: !report.stabilized,
    })
}

/// Distance from `x` to the hull cloud of the anchors; passes within `eps + grid resolution`.
pub fn certify_in_hull(problem: &FrechetProblem, x: &Point, search: &SearchParams) -> Result<Certificate> {
    problem.space.check_point(x)?;
    let anchors = problem.anchor_cloud(search.threading.dedup_eps)?;
    let (hull, report) = convex_hull_cloud(&anchors, search.eps, search.n_max, &search.threading)?;
    let distance = hull.distance_to(x)?;
    let tolerance = hull_tolerance(&anchors, search.eps, &search.threading);
    Ok(Certificate { distance, tolerance, passed: distance <= tolerance, hull_size: hull.len(), hull_stabilized: report.stabilized })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectionVerdict {
    pub samples: usize,
    pub violations: usize,
    /// Largest `d(x,Px)^2 + d(Px,y)^2 - d(x,y)^2` seen.
    pub worst_excess: f64,
    pub tol: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Value>,
}

/// Default tolerance for [`projection_inequality_check`]: `10 (grid resolution + eps)`.
pub fn default_projection_tol(hull: &PointCloud, eps: f64, params: &ThreadingParams) -> f64 {
    10.0 * (params.grid_resolution(hull.diameter()) + eps)
}

/// Samples `x` in a box around the hull and `y` in the hull cloud and checks
/// `d(x, Px)^2 + d(Px, y)^2 <= d(x, y)^2 + tol` with `Px` the nearest cloud point.
pub fn projection_inequality_check(hull: &PointCloud, n_samples: usize, seed: u64, tol: f64) -> Result<ProjectionVerdict> {
    if hull.is_empty() {
        return Err(GeoError::EmptyCloud);
    }
    let mut flat = Vec::new();
    let mut extent = 0.0f64;
    for p in hull.points() {
        flat.clear();
        p.write_flat(&mut flat);
        extent = flat.iter().fold(extent, |m, v| m.max(v.abs()));
    }
    let radius = 2.0 * extent + 1.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts = hull.points();
    let draws: Vec<(Point, usize)> = (0..n_samples)
        .map(|_| {
            let x = hull.space().sample_point(&mut rng, radius);
            let j = rand::Rng::random_range(&mut rng, 0..pts.len());
            (x, j)
        })
        .collect();
    let excess: Vec<f64> = draws
        .par_iter()
        .map(|(x, j)| {
            let (pi, dxp) = hull.nearest_raw(x).expect("nonempty hull");
            let y = &pts[*j];
            let dpy = raw_dist(&pts[pi], y);
            let dxy = raw_dist(x, y);
            dxp * dxp + dpy * dpy - dxy * dxy
        })
        .collect();
    let (worst_i, worst) = excess
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    let violations = excess.iter().filter(|&&e| e > tol).count();
    let witness = (violations > 0).then(|| {
        let (x, j) = &draws[worst_i];
        json!({"x": x.to_json(), "y": pts[*j].to_json(), "excess": worst})
    });
    Ok(ProjectionVerdict { samples: n_samples, violations, worst_excess: worst, tol, passed: violations == 0, witness })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Isometry, Quadrant};
    use rand::Rng;

    fn e1_problem(xs: &[f64], w: Option<Vec<f64>>, p: u32) -> FrechetProblem {
        FrechetProblem::new(SpaceDescriptor::Euclidean { dim: 1 }, xs.iter().map(|&x| Point::euclidean([x])).collect(), w, p)
            .unwrap()
    }

    fn triangle(p: u32) -> FrechetProblem {
        let pts = [[0.0, 0.0], [2.0, 0.0], [0.0, 2.0]].into_iter().map(Point::euclidean).collect();
        FrechetProblem::uniform(SpaceDescriptor::Euclidean { dim: 2 }, pts, p).unwrap()
    }

    #[test]
    fn objective_examples() {
        let single = e1_problem(&[0.3], None, 2);
        assert_eq!(single.objective(&Point::euclidean([0.3])).unwrap(), 0.0);
        assert_eq!(e1_problem(&[0.0, 2.0], None, 2).objective(&Point::euclidean([1.0])).unwrap(), 1.0);
        assert_eq!(e1_problem(&[0.0, 2.0], None, 1).objective(&Point::euclidean([1.0])).unwrap(), 1.0);
    }

    #[test]
    fn construction_errors() {
        let e1 = SpaceDescriptor::Euclidean { dim: 1 };
        let pts = vec![Point::euclidean([0.0]), Point::euclidean([1.0])];
        assert!(FrechetProblem::new(e1.clone(), pts.clone(), Some(vec![0.0, 0.0]), 2).is_err());
        assert!(FrechetProblem::new(e1.clone(), pts.clone(), Some(vec![1.0]), 2).is_err());
        assert!(FrechetProblem::new(e1.clone(), pts.clone(), Some(vec![1.0, -1.0]), 2).is_err());
        assert!(FrechetProblem::new(e1.clone(), pts.clone(), None, 3).is_err());
        assert!(FrechetProblem::new(e1, vec![], None, 2).is_err());
        let p = e1_problem(&[0.0, 1.0], Some(vec![3.0, 1.0]), 2);
        assert_eq!(p.weights(), &[0.75, 0.25]);
    }

    #[test]
    fn euclidean_mean_examples() {
        let m = euclidean_mean(&triangle(2)).unwrap();
        let c = m.coords().unwrap();
        assert!((c[0] - 2.0 / 3.0).abs() < 1e-15 && (c[1] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(euclidean_mean(&e1_problem(&[0.4], None, 2)).unwrap(), Point::euclidean([0.4]));
        assert_eq!(euclidean_mean(&e1_problem(&[0.0, 2.0], Some(vec![0.75, 0.25]), 2)).unwrap(), Point::euclidean([0.5]));
        assert!(matches!(euclidean_mean(&triangle(1)), Err(GeoError::Unsupported(_))));
        let bq = FrechetProblem::uniform(SpaceDescriptor::Biquadrant, vec![Point::biquadrant(Quadrant::Plus, 1.0, 1.0).unwrap()], 2)
            .unwrap();
        assert!(matches!(euclidean_mean(&bq), Err(GeoError::Unsupported(_))));
    }

    #[test]
    fn inductive_cycle_examples() {
        let r = inductive_mean(&e1_problem(&[0.0, 2.0], None, 2), 1, Schedule::Cycle, 0).unwrap();
        assert_eq!(r.minimizer, Point::euclidean([1.0]));
        let r = inductive_mean(&triangle(2), 2, Schedule::Cycle, 0).unwrap();
        let c = r.minimizer.coords().unwrap();
        assert!((c[0] - 2.0 / 3.0).abs() < 1e-12 && (c[1] - 2.0 / 3.0).abs() < 1e-12);
        assert!(inductive_mean(&triangle(1), 2, Schedule::Cycle, 0).is_err());
        let skewed = e1_problem(&[0.0, 2.0], Some(vec![0.9, 0.1]), 2);
        assert!(inductive_mean(&skewed, 1, Schedule::Cycle, 0).is_err());
    }

    #[test]
    fn inductive_random_symmetric_biquadrant() {
        let pts = vec![Point::biquadrant(Quadrant::Plus, 1.0, 1.0).unwrap(), Point::biquadrant(Quadrant::Minus, -1.0, -1.0).unwrap()];
        let pr = FrechetProblem::uniform(SpaceDescriptor::Biquadrant, pts, 2).unwrap();
        let r = inductive_mean(&pr, 100_000, Schedule::Random, 3).unwrap();
        let o = Point::biquadrant(Quadrant::Plus, 0.0, 0.0).unwrap();
        assert!(raw_dist(&r.minimizer, &o) < 5e-2, "{:?}", r.minimizer);
    }

    #[test]
    fn golden_section_finds_interior_and_endpoint_minima() {
        let (t, v) = golden_section(|t| (t - 0.3).powi(2), 0.0, 1.0, 1e-10);
        assert!((t - 0.3).abs() < 1e-6 && v < 1e-12);
        let (t, _) = golden_section(|t| t, 0.0, 1.0, 1e-10);
        assert_eq!(t, 0.0);
    }

    #[test]
    fn search_mean_triangle() {
        let r = threading_search_mean(&triangle(2), &SearchParams::default()).unwrap();
        let c = r.minimizer.coords().unwrap();
        assert!((c[0] - 2.0 / 3.0).abs() < 2e-2 && (c[1] - 2.0 / 3.0).abs() < 2e-2, "{c:?}");
        assert!(r.certificate.as_ref().unwrap().passed);
        assert!(!r.degraded);
    }

    #[test]
    fn search_median_at_heavier_point() {
        let pr = e1_problem(&[0.0, 2.0], Some(vec![0.7, 0.3]), 1);
        let r = threading_search_mean(&pr, &SearchParams::default()).unwrap();
        assert!(r.minimizer.coords().unwrap()[0].abs() < 1e-9, "{:?}", r.minimizer);
    }

    #[test]
    fn certificate_examples() {
        let s = SearchParams::default();
        let tri = triangle(2);
        assert!(certify_in_hull(&tri, &euclidean_mean(&tri).unwrap(), &s).unwrap().passed);
        let far = certify_in_hull(&tri, &Point::euclidean([10.0, 10.0]), &s).unwrap();
        assert!(!far.passed);
        // distance to the hypotenuse x + y = 2
        assert!((far.distance - 18.0 / 2f64.sqrt()).abs() < 0.05, "{far:?}");
        let single = e1_problem(&[0.5], None, 2);
        assert_eq!(certify_in_hull(&single, &Point::euclidean([0.5]), &s).unwrap().distance, 0.0);
    }

    #[test]
    fn projection_segment_example() {
        let seg = PointCloud::new(
            SpaceDescriptor::Euclidean { dim: 1 },
            (0..=64).map(|i| Point::euclidean([i as f64 / 32.0])).collect(),
            1e-6,
        )
        .unwrap();
        // nearest-point projection onto a cloud of spacing h is off by up to h/2
        let tol = default_projection_tol(&seg, 1e-2, &ThreadingParams::default());
        let v = projection_inequality_check(&seg, 1_000, 4, tol).unwrap();
        assert!(v.passed, "{v:?}");
        let strict = projection_inequality_check(&seg, 1_000, 4, 1e-9).unwrap();
        assert!(strict.worst_excess <= 2.0 * 2.0 * (1.0 / 64.0) + 1e-12, "{strict:?}");
        // x = 3 projects to 2; with y = 0: 1 + 4 <= 9
        let x = Point::euclidean([3.0]);
        let (pi, dxp) = seg.nearest(&x).unwrap().unwrap();
        assert_eq!(seg.points()[pi], Point::euclidean([2.0]));
        assert!(dxp * dxp + 4.0 <= 9.0);
    }

    #[test]
    fn json_round_trip() {
        let pr = e1_problem(&[0.0, 2.0], Some(vec![1.0, 3.0]), 1);
        assert_eq!(FrechetProblem::from_json(&pr.to_json()).unwrap(), pr);
        let v = json!({"space": {"kind": "euclidean", "dim": 1}, "points": [[0.0], [1.0]], "p": 2});
        assert_eq!(FrechetProblem::from_json(&v).unwrap().weights(), &[0.5, 0.5]);
    }

    /// Minimum of F_2 over a 1e-3 grid on the closed hull of
    /// `{plus(2,0), plus(0,2), minus(-2,-2)}`: the plus triangle and the minus diagonal.
    fn biquadrant_brute_force() -> ([f64; 2], f64) {
        let f = |a: f64, b: f64| {
            // (a, b) is in the plus quadrant when a + b >= 0, else on the minus diagonal
            let to_minus_anchor = if a + b >= 0.0 { a.hypot(b) + 8f64.sqrt() } else { (a + 2.0).hypot(b + 2.0) };
            let to_plus = |p: [f64; 2]| if a + b >= 0.0 { (a - p[0]).hypot(b - p[1]) } else { a.hypot(b) + 2.0 };
            (to_plus([2.0, 0.0]).powi(2) + to_plus([0.0, 2.0]).powi(2) + to_minus_anchor.powi(2)) / 3.0
        };
        let mut best = ([0.0, 0.0], f64::INFINITY);
        for i in 0..=2000 {
            for j in 0..=(2000 - i) {
                let (a, b) = (i as f64 * 1e-3, j as f64 * 1e-3);
                let v = f(a, b);
                if v < best.1 {
                    best = ([a, b], v);
                }
            }
        }
        for i in 1..=2000 {
            let a = -(i as f64) * 1e-3;
            let v = f(a, a);
            if v < best.1 {
                best = ([a, a], v);
            }
        }
        best
    }

    #[test]
    fn search_mean_matches_brute_force_on_biquadrant() {
        let pts = vec![
            Point::biquadrant(Quadrant::Plus, 2.0, 0.0).unwrap(),
            Point::biquadrant(Quadrant::Plus, 0.0, 2.0).unwrap(),
            Point::biquadrant(Quadrant::Minus, -2.0, -2.0).unwrap(),
        ];
        let pr = FrechetProblem::uniform(SpaceDescriptor::Biquadrant, pts, 2).unwrap();
        let (xy, value) = biquadrant_brute_force();
        assert!((value - 16.0 / 3.0).abs() < 1e-9 && xy == [0.0, 0.0], "{xy:?} {value}");
        let r = threading_search_mean(&pr, &SearchParams::default()).unwrap();
        assert!((r.objective - value).abs() <= 5e-3, "{} vs {value}", r.objective);
        let oracle = Point::biquadrant_from_plane(xy[0], xy[1]).unwrap();
        assert!(raw_dist(&r.minimizer, &oracle) <= 5e-3, "{:?}", r.minimizer);
    }

    #[test]
    fn euclidean_mean_beats_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let e3 = SpaceDescriptor::Euclidean { dim: 3 };
        let pts = (0..7).map(|_| e3.sample_point(&mut rng, 2.0)).collect();
        let w = (0..7).map(|_| rng.random_range(0.1..1.0)).collect();
        let pr = FrechetProblem::new(e3.clone(), pts, Some(w), 2).unwrap();
        let best = pr.objective(&euclidean_mean(&pr).unwrap()).unwrap();
        for _ in 0..1_000 {
            assert!(best <= pr.objective(&e3.sample_point(&mut rng, 3.0)).unwrap());
        }
    }

    #[test]
    fn minimizer_follows_isometries() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let e2 = SpaceDescriptor::Euclidean { dim: 2 };
        let pts = (0..5).map(|_| e2.sample_point(&mut rng, 2.0)).collect();
        let pr = FrechetProblem::uniform(e2.clone(), pts, 2).unwrap();
        let phi = Isometry::random(&e2, &mut rng, 3.0);
        let moved = pr.try_map(e2, |x| phi.apply(x)).unwrap();
        let (m, mm) = (euclidean_mean(&pr).unwrap(), euclidean_mean(&moved).unwrap());
        assert!(raw_dist(&phi.apply(&m).unwrap(), &mm) < 1e-9);

        let search = SearchParams::default();
        for space in ["biquadrant", "product(euclidean:1,biquadrant)"] {
            let space: SpaceDescriptor = space.parse().unwrap();
            let pts = (0..3).map(|_| space.sample_point(&mut rng, 1.0)).collect();
            let pr = FrechetProblem::uniform(space.clone(), pts, 2).unwrap();
            let phi = Isometry::random(&space, &mut rng, 1.0);
            let moved = pr.try_map(space, |x| phi.apply(x)).unwrap();
            let r = threading_search_mean(&pr, &search).unwrap();
            let rm = threading_search_mean(&moved, &search).unwrap();
            let tol = r.certificate.as_ref().unwrap().tolerance;
            let gap = raw_dist(&phi.apply(&r.minimizer).unwrap(), &rm.minimizer);
            assert!(gap <= tol, "{gap} > {tol}");
        }
    }

    proptest::proptest! {
        #[test]
        fn f2_is_strongly_convex_along_geodesics(i in 0..3usize, seed in proptest::prelude::any::<u64>(), t in 0.0..=1.0f64) {
            let space: SpaceDescriptor = ["euclidean:2", "biquadrant", "product(euclidean:1,biquadrant)"][i].parse().unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts = (0..4).map(|_| space.sample_point(&mut rng, 5.0)).collect();
            let w = (0..4).map(|_| rng.random_range(0.1..1.0)).collect();
            let pr = FrechetProblem::new(space.clone(), pts, Some(w), 2).unwrap();
            let (x, y) = (space.sample_point(&mut rng, 5.0), space.sample_point(&mut rng, 5.0));
            let xt = raw_interpolate(&x, &y, t);
            let bound = (1.0 - t) * pr.objective(&x).unwrap() + t * pr.objective(&y).unwrap() - t * (1.0 - t) * raw_dist(&x, &y).powi(2);
            proptest::prop_assert!(pr.objective(&xt).unwrap() <= bound + 1e-9);
        }
    }
}
