//! The threading operator on point clouds and the iterations built on it.
//!
//! `thr S` is the union of all geodesic segments with both endpoints in `S`. On a cloud it
//! is discretized by a uniform grid of `grid_k` parameters per segment (endpoints
//! included), merged at `dedup_eps`, and kept below `cap` points by a metric net that never
//! drops the protected input points.
//!
//! Every step records a resolution `rho`: the Hausdorff distance between the produced
//! cloud and the exact threading of its input is at most `rho`. Stabilization tests allow
//! gaps up to `eps + 2 rho_{n-1} + rho_n`.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cloud::{hausdorff, PointCloud};
use super::index::{farthest_point_select, greedy_net, reduce_by_net, FlatCoords};
use crate::config;
use crate::error::{GeoError, Result};
use crate::geometry::metric::{raw_dist, raw_interpolate};
use crate::geometry::Point;

/// Exact farthest-point capping is used while `points * cap` stays below this.
const FPS_WORK_LIMIT: usize = 20_000_000;
const THIN_STREAM: u64 = 0x7468_696e;
const CAP_STREAM: u64 = 0x6361_7070;

/// Discretization parameters shared by every threading-based operation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreadingParams {
    /// Grid points per geodesic segment, endpoints included.
    pub grid_k: usize,
    /// Upper bound on the size of a produced cloud (input points are exempt).
    pub cap: usize,
    /// Merge radius for duplicate points.
    pub dedup_eps: f64,
    pub seed: u64,
    /// Upper bound on grid points generated in one step; larger inputs are thinned first.
    pub max_candidates: usize,
    /// Record wall time per iteration (breaks byte-identical reports).
    #[serde(skip)]
    pub record_timings: bool,
}

impl Default for ThreadingParams {
    fn default() -> Self {
        ThreadingParams {
            grid_k: config::DEFAULT_GRID_K,
            cap: config::DEFAULT_CAP,
            dedup_eps: config::DEFAULT_DEDUP_EPS,
            seed: 0,
            max_candidates: config::DEFAULT_MAX_CANDIDATES,
            record_timings: false,
        }
    }
}

impl ThreadingParams {
    pub fn validate(&self) -> Result<()> {
        if self.grid_k < 2 {
            return Err(GeoError::OutOfRange { what: "grid_k", value: self.grid_k as f64 });
        }
        if self.cap == 0 {
            return Err(GeoError::OutOfRange { what: "cap", value: 0.0 });
        }
        if !(self.dedup_eps > 0.0 && self.dedup_eps.is_finite()) {
            return Err(GeoError::OutOfRange { what: "dedup_eps", value: self.dedup_eps });
        }
        if self.max_candidates < 2 {
            return Err(GeoError::OutOfRange { what: "max_candidates", value: self.max_candidates as f64 });
        }
        Ok(())
    }

    /// Spacing of grid points along the longest segment of a set of diameter `diameter`.
    pub fn grid_resolution(&self, diameter: f64) -> f64 {
        diameter / (self.grid_k - 1) as f64
    }

    fn candidate_count(&self, m: usize) -> usize {
        let inner = self.grid_k - 2;
        m.saturating_add((m.saturating_mul(m.saturating_sub(1)) / 2).saturating_mul(inner))
    }

    /// Largest generator count whose pair expansion fits `max_candidates`.
    fn max_generators(&self) -> usize {
        let (mut lo, mut hi) = (2usize, self.max_candidates.max(2));
        while lo < hi {
            let mid = lo + (hi - lo).div_ceil(2);
            if self.candidate_count(mid) <= self.max_candidates {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        lo
    }
}

/// What one threading step did to its input.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepStats {
    pub input_size: usize,
    /// Generators actually paired (smaller than the input when thinning kicked in).
    pub generators: usize,
    pub thin_radius: f64,
    pub candidates: usize,
    pub output_size: usize,
    pub max_segment: f64,
    pub cap_hit: bool,
    pub cap_radius: f64,
    /// Bound on `d_H(output, thr(input))`.
    pub resolution: f64,
}

fn seeded_order(range: std::ops::Range<usize>, seed: u64, stream: u64) -> Vec<usize> {
    let mut order: Vec<usize> = range.collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ stream);
    order.shuffle(&mut rng);
    order
}

/// Upper bound on the diameter: twice the largest distance from the first point.
fn diameter_bound(points: &[Point]) -> f64 {
    match points.first() {
        Some(p0) => 2.0 * points.par_iter().map(|q| raw_dist(p0, q)).reduce(|| 0.0, f64::max),
        None => 0.0,
    }
}

/// Deduplicates the candidates and keeps at most `cap` of them, always keeping the first
/// `n_protected`. Returns kept indices in ascending order, whether the cap was hit and the
/// covering radius of the dropped points.
fn reduce_candidates(points: &[Point], n_protected: usize, params: &ThreadingParams) -> (Vec<usize>, bool, f64) {
    let forced: Vec<usize> = (0..n_protected).collect();
    let flat = FlatCoords::new(points);
    if points.len() <= params.cap || points.len().saturating_mul(params.cap) <= FPS_WORK_LIMIT {
        let unique = greedy_net(points, &flat, &forced, n_protected..points.len(), params.dedup_eps, usize::MAX)
            .expect("unbounded net");
        if unique.len() <= params.cap {
            return (unique, false, 0.0);
        }
        let subset: Vec<Point> = unique.iter().map(|&i| points[i].clone()).collect();
        let (picked, radius) = farthest_point_select(&subset, &forced, 0, params.cap.max(n_protected));
        let mut kept: Vec<usize> = picked.into_iter().map(|j| unique[j]).collect();
        kept.sort_unstable();
        return (kept, true, radius + params.dedup_eps);
    }
    // a net at any radius >= dedup_eps also deduplicates
    let order = seeded_order(n_protected..points.len(), params.seed, CAP_STREAM);
    let red = reduce_by_net(points, &flat, &forced, &order, params.cap, params.dedup_eps, diameter_bound(points));
    let cap_hit = red.radius > params.dedup_eps;
    (red.kept, cap_hit, if cap_hit { red.radius } else { 0.0 })
}

/// One threading step with the first `n_protected` input points exempt from removal.
///
/// The output lists the protected points first, in input order.
pub fn thread_step(cloud: &PointCloud, n_protected: usize, params: &ThreadingParams) -> Result<(PointCloud, StepStats)> {
    params.validate()?;
    if cloud.is_empty() {
        return Err(GeoError::EmptyCloud);
    }
    let input = cloud.points();
    let n_protected = n_protected.min(input.len());

    // generators: the whole input, or a metric net of it when the pair expansion is too big
    let max_gen = params.max_generators();
    let (generators, thin_radius): (Vec<usize>, f64) = if input.len() <= max_gen {
        ((0..input.len()).collect(), 0.0)
    } else {
        let flat = FlatCoords::new(input);
        let order = seeded_order(0..input.len(), params.seed, THIN_STREAM);
        let red = reduce_by_net(input, &flat, &[], &order, max_gen, params.dedup_eps, diameter_bound(input));
        (red.kept, red.radius)
    };

    let k = params.grid_k;
    let denom = (k - 1) as f64;
    let g = generators.len();
    let chunks: Vec<(Vec<Point>, f64)> = (0..g)
        .into_par_iter()
        .map(|a| {
            let x = &input[generators[a]];
            let mut out = Vec::with_capacity((g - a - 1) * (k - 2));
            let mut longest = 0.0f64;
            for &b in &generators[a + 1..] {
                let y = &input[b];
                longest = longest.max(raw_dist(x, y));
                for j in 1..k - 1 {
                    out.push(raw_interpolate(x, y, j as f64 / denom));
                }
            }
            (out, longest)
        })
        .collect();

    let mut candidates: Vec<Point> = Vec::with_capacity(n_protected + g + chunks.iter().map(|c| c.0.len()).sum::<usize>());
    candidates.extend(input[..n_protected].iter().cloned());
    candidates.extend(generators.iter().map(|&i| input[i].clone()));
    let mut max_segment = 0.0f64;
    for (pts, longest) in chunks {
        max_segment = max_segment.max(longest);
        candidates.extend(pts);
    }
    let n_candidates = candidates.len();

    let (kept, cap_hit, cap_radius) = reduce_candidates(&candidates, n_protected, params);
    let mut slots: Vec<Option<Point>> = candidates.into_iter().map(Some).collect();
    let points: Vec<Point> = kept.into_iter().map(|i| slots[i].take().expect("kept index")).collect();
    drop(slots);

    let half_spacing = max_segment / (2.0 * denom);
    let stats = StepStats {
        input_size: input.len(),
        generators: g,
        thin_radius,
        candidates: n_candidates,
        output_size: points.len(),
        max_segment,
        cap_hit,
        cap_radius,
        resolution: half_spacing + thin_radius + cap_radius + params.dedup_eps,
    };
    let out = PointCloud::from_unique(cloud.space().clone(), points, cloud.dedup_eps());
    Ok((out, stats))
}

/// `thr S` on a cloud; every input point is kept.
pub fn thread_once(cloud: &PointCloud, params: &ThreadingParams) -> Result<PointCloud> {
    Ok(thread_step(cloud, cloud.len(), params)?.0)
}

/// `z` lies within `tol` of a geodesic segment joining two points of `cloud`, tested by
/// metric betweenness plus the distance to the geodesic point at the matching parameter.
///
/// Returns the witnessing pair and parameter.
pub fn thr1_witness(cloud: &PointCloud, z: &Point, tol: f64) -> Result<Option<(usize, usize, f64)>> {
    cloud.space().check_point(z)?;
    let pts = cloud.points();
    for i in 0..pts.len() {
        let x = &pts[i];
        let dxz = raw_dist(x, z);
        if dxz <= tol {
            return Ok(Some((i, i, 0.0)));
        }
        for (j, y) in pts.iter().enumerate().skip(i + 1) {
            let dxy = raw_dist(x, y);
            if dxy == 0.0 {
                continue;
            }
            let dzy = raw_dist(z, y);
            if dxz + dzy > dxy + tol {
                continue;
            }
            let t = (dxz / dxy).min(1.0);
            if raw_dist(&raw_interpolate(x, y, t), z) <= tol {
                return Ok(Some((i, j, t)));
            }
        }
    }
    Ok(None)
}

/// Exact membership test for `thr S` with `S` finite (up to `tol`).
pub fn member_thr1(cloud: &PointCloud, z: &Point, tol: f64) -> Result<bool> {
    Ok(thr1_witness(cloud, z, tol)?.is_some())
}

/// One row of a [`ThreadingReport`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub n: usize,
    pub size: usize,
    /// `d_H(thr^n S, thr^{n-1} S)` on the clouds.
    pub gap: f64,
    /// Bound on the distance between this cloud and the exact threading of the previous one.
    pub resolution: f64,
    /// Part of `gap` attributable to discretization: `2 rho_{n-1} + rho_n`.
    pub slack: f64,
    pub candidates: usize,
    pub generators: usize,
    pub cap_hit: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub millis: Option<u64>,
}

impl IterationRecord {
    pub fn within(&self, eps: f64) -> bool {
        self.gap <= eps + self.slack
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThreadingReport {
    pub params: ThreadingParams,
    pub input_size: usize,
    pub records: Vec<IterationRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    /// Iteration at which the chain stabilized, when a stabilization run was requested.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stabilized_at: Option<usize>,
    pub stabilized: bool,
    pub cap_hit: bool,
}

impl ThreadingReport {
    fn new(params: &ThreadingParams, input_size: usize) -> Self {
        ThreadingReport {
            params: params.clone(),
            input_size,
            records: Vec::new(),
            eps: None,
            n_max: None,
            stabilized_at: None,
            stabilized: false,
            cap_hit: false,
        }
    }

    /// Gaps are nonincreasing from iteration 1 on (diagnostic only).
    pub fn gaps_monotone(&self) -> bool {
        self.records.windows(2).all(|w| w[1].gap <= w[0].gap + 1e-12)
    }

    pub fn last_resolution(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.resolution)
    }

    /// CSV mirror of the per-iteration table: `n,size,gap,millis`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,size,gap,millis\n");
        for r in &self.records {
            let millis = r.millis.map(|m| m.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{},{}\n", r.n, r.size, r.gap, millis));
        }
        out
    }
}

/// Drives repeated threading, recording gaps and stopping early on stabilization.
struct Chain<'a> {
    params: &'a ThreadingParams,
    n_protected: usize,
    current: PointCloud,
    prev_resolution: f64,
    report: ThreadingReport,
}

impl<'a> Chain<'a> {
    fn new(cloud: &PointCloud, params: &'a ThreadingParams) -> Result<Self> {
        params.validate()?;
        if cloud.is_empty() {
            return Err(GeoError::EmptyCloud);
        }
        Ok(Chain {
            params,
            n_protected: cloud.len(),
            current: cloud.clone(),
            prev_resolution: 0.0,
            report: ThreadingReport::new(params, cloud.len()),
        })
    }

    fn step(&mut self) -> Result<&IterationRecord> {
        let started = Instant::now();
        let (next, stats) = thread_step(&self.current, self.n_protected, self.params)?;
        let gap = hausdorff(&next, &self.current)?;
        let n = self.report.records.len() + 1;
        let record = IterationRecord {
            n,
            size: next.len(),
            gap,
            resolution: stats.resolution,
            slack: 2.0 * self.prev_resolution + stats.resolution,
            candidates: stats.candidates,
            generators: stats.generators,
            cap_hit: stats.cap_hit,
            millis: self.params.record_timings.then(|| started.elapsed().as_millis() as u64),
        };
        self.report.cap_hit |= stats.cap_hit;
        self.prev_resolution = stats.resolution;
        self.current = next;
        self.report.records.push(record);
        Ok(self.report.records.last().expect("just pushed"))
    }
}

/// Applies the threading step `n_iters` times.
pub fn iterate_threading(cloud: &PointCloud, n_iters: usize, params: &ThreadingParams) -> Result<(PointCloud, ThreadingReport)> {
    let mut chain = Chain::new(cloud, params)?;
    for _ in 0..n_iters {
        chain.step()?;
    }
    Ok((chain.current, chain.report))
}

/// Like [`iterate_threading`] but also returns every intermediate cloud (`thr^0 .. thr^n`).
pub fn threading_chain(cloud: &PointCloud, n_iters: usize, params: &ThreadingParams) -> Result<(Vec<PointCloud>, ThreadingReport)> {
    let mut chain = Chain::new(cloud, params)?;
    let mut clouds = vec![cloud.clone()];
    for _ in 0..n_iters {
        chain.step()?;
        clouds.push(chain.current.clone());
    }
    Ok((clouds, chain.report))
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(GeoError::OutOfRange { what: "eps", value: eps })
    }
}

/// Iterates until consecutive clouds agree within `eps` (plus discretization slack) or
/// `n_max` steps were taken. Non-stabilization is reported, not raised.
pub fn convex_hull_cloud(
    cloud: &PointCloud,
    eps: f64,
    n_max: usize,
    params: &ThreadingParams,
) -> Result<(PointCloud, ThreadingReport)> {
    run_to_stability(cloud, eps, n_max, params, |_| {})
}

/// Like [`convex_hull_cloud`] but also returns every cloud of the chain (`thr^0 .. thr^n`).
pub fn stabilizing_chain(
    cloud: &PointCloud,
    eps: f64,
    n_max: usize,
    params: &ThreadingParams,
) -> Result<(Vec<PointCloud>, ThreadingReport)> {
    let mut clouds = vec![cloud.clone()];
    let (_, report) = run_to_stability(cloud, eps, n_max, params, |c| clouds.push(c.clone()))?;
    Ok((clouds, report))
}

fn run_to_stability(
    cloud: &PointCloud,
    eps: f64,
    n_max: usize,
    params: &ThreadingParams,
    mut visit: impl FnMut(&PointCloud),
) -> Result<(PointCloud, ThreadingReport)> {
    check_eps(eps)?;
    let mut chain = Chain::new(cloud, params)?;
    chain.report.eps = Some(eps);
    chain.report.n_max = Some(n_max);
    for _ in 0..n_max {
        let record = chain.step()?;
        let (n, done) = (record.n, record.within(eps));
        visit(&chain.current);
        if done {
            chain.report.stabilized = true;
            chain.report.stabilized_at = Some(n);
            break;
        }
    }
    Ok((chain.current, chain.report))
}

/// Threading-degree estimate: the smallest `n` with `thr^{n+1} S` indistinguishable from
/// `thr^n S` at tolerance `eps`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegreeEstimate {
    /// `None` when the chain did not stabilize within `n_max` steps.
    pub degree: Option<usize>,
    pub stabilized: bool,
    /// Cloud gap at the stabilizing step (or the last step explored).
    pub gap: f64,
    pub slack: f64,
    pub eps: f64,
    pub n_max: usize,
    pub report: ThreadingReport,
}

pub fn estimate_degree(cloud: &PointCloud, eps: f64, n_max: usize, params: &ThreadingParams) -> Result<DegreeEstimate> {
    let (_, report) = convex_hull_cloud(cloud, eps, n_max, params)?;
    let last = report.records.last();
    Ok(DegreeEstimate {
        degree: report.stabilized_at.map(|n| n - 1),
        stabilized: report.stabilized,
        gap: last.map_or(0.0, |r| r.gap),
        slack: last.map_or(0.0, |r| r.slack),
        eps,
        n_max,
        report,
    })
}
