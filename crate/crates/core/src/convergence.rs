//! Set-convergence experiments: hulls of increasing finite subsets approaching a convex
//! target, and nondecreasing chains approaching the closure of their union.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{GeoError, Result};
use crate::geometry::metric::raw_dist;
use crate::threading::index::farthest_point_select;
use crate::geometry::SpaceDescriptor;
use crate::threading::cloud::directed_hausdorff;
use crate::threading::{convex_hull_cloud, euclidean_hull_distance, hausdorff, PointCloud, ThreadingParams};

/// Enumeration of the cloud by farthest-point traversal, starting from the point farthest
/// from a seeded random cloud point.
pub fn farthest_point_order(cloud: &PointCloud, seed: u64) -> Vec<usize> {
    let pts = cloud.points();
    if pts.is_empty() {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probe = &pts[rng.random_range(0..pts.len())];
    let start = (0..pts.len()).fold(0, |best, i| if raw_dist(probe, &pts[i]) > raw_dist(probe, &pts[best]) { i } else { best });
    let (mut order, _) = farthest_point_select(pts, &[], start, pts.len());
    // append anything the traversal skipped
    if order.len() < pts.len() {
        let mut seen = vec![false; pts.len()];
        order.iter().for_each(|&i| seen[i] = true);
        order.extend((0..pts.len()).filter(|&i| !seen[i]));
    }
    order
}

/// Largest nearest-neighbour distance inside the cloud (0 for a single point).
pub fn sampling_resolution(cloud: &PointCloud) -> f64 {
    let pts = cloud.points();
    if pts.len() < 2 {
        return 0.0;
    }
    (0..pts.len())
        .into_par_iter()
        .map(|i| {
            pts.iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, q)| raw_dist(&pts[i], q))
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| 0.0, f64::max)
}

/// Subset sizes `1 = n_0 < ... < n_last = total`, roughly geometric, at most `n_steps` of them.
pub fn geometric_sizes(total: usize, n_steps: usize) -> Vec<usize> {
    if total == 0 || n_steps == 0 {
        return Vec::new();
    }
    if n_steps == 1 {
        return vec![total];
    }
    let mut sizes: Vec<usize> = (0..n_steps)
        .map(|j| (total as f64).powf(j as f64 / (n_steps - 1) as f64).round() as usize)
        .map(|n| n.clamp(1, total))
        .collect();
    sizes.dedup();
    *sizes.last_mut().expect("nonempty") = total;
    sizes
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceStep {
    pub n: usize,
    pub hull_size: usize,
    /// `d_H(hull cloud of S_n, target)`.
    pub gap: f64,
    /// `max_{t in target} d(t, co S_n)`, the distance from `co S_n` to the closed hull of the
    /// target. Exact for Euclidean targets, measured against the hull cloud otherwise.
    pub limit_gap: f64,
    pub stabilized: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub millis: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub target_size: usize,
    pub sampling_resolution: f64,
    pub steps: Vec<ConvergenceStep>,
    pub final_gap: f64,
    /// Limit gaps never increase by more than the monotonicity slack after the first step.
    pub monotone_after_first: bool,
    pub monotone_slack: f64,
    pub passed: bool,
}

impl ConvergenceReport {
    /// CSV mirror: `n,size,gap,millis`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,size,gap,millis\n");
        for s in &self.steps {
            let millis = s.millis.map(|m| m.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{},{}\n", s.n, s.hull_size, s.gap, millis));
        }
        out
    }
}

/// Settings for [`increasing_hull_convergence`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceParams {
    pub n_steps: usize,
    pub eps: f64,
    pub n_max: usize,
    pub threading: ThreadingParams,
    /// Allowed increase between consecutive gaps, in units of the sampling resolution.
    pub monotone_slack: f64,
}

impl Default for ConvergenceParams {
    fn default() -> Self {
        ConvergenceParams {
            n_steps: 10,
            eps: crate::config::DEFAULT_EPS,
            n_max: crate::config::DEFAULT_N_MAX,
            threading: ThreadingParams::default(),
            monotone_slack: 0.0,
        }
    }
}

/// Builds `S_n` from the first `n` points of a farthest-point enumeration of `target` and
/// measures how the hull clouds of `S_n` approach `target`.
///
/// Passes when the final gap is at most twice the sampling resolution of `target`. Monotonicity
/// is judged on the limit gaps: the direct gap to a finite sample can wobble by up to the
/// sampling resolution as the hull uncovers holes in it.
pub fn increasing_hull_convergence(target: &PointCloud, params: &ConvergenceParams, seed: u64) -> Result<ConvergenceReport> {
    if target.is_empty() {
        return Err(GeoError::EmptyCloud);
    }
    let order = farthest_point_order(target, seed);
    let resolution = sampling_resolution(target);
    let mut steps = Vec::new();
    for n in geometric_sizes(target.len(), params.n_steps) {
        let started = Instant::now();
        let subset = order[..n].iter().map(|&i| target.points()[i].clone()).collect();
        let s_n = PointCloud::new(target.space().clone(), subset, target.dedup_eps())?;
        let (hull, report) = convex_hull_cloud(&s_n, params.eps, params.n_max, &params.threading)?;
        let limit_gap = match target.space() {
            SpaceDescriptor::Euclidean { .. } => target
                .points()
                .par_iter()
                .map(|t| euclidean_hull_distance(s_n.points(), t))
                .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))?,
            _ => directed_hausdorff(target, &hull),
        };
        steps.push(ConvergenceStep {
            n,
            hull_size: hull.len(),
            gap: hausdorff(&hull, target)?,
            limit_gap,
            stabilized: report.stabilized,
            millis: params.threading.record_timings.then(|| started.elapsed().as_millis() as u64),
        });
    }
    let slack = params.monotone_slack * resolution;
    let monotone_after_first = steps.windows(2).skip(1).all(|w| w[1].limit_gap <= w[0].limit_gap + slack);
    let final_gap = steps.last().map_or(0.0, |s| s.gap);
    Ok(ConvergenceReport {
        target_size: target.len(),
        sampling_resolution: resolution,
        final_gap,
        passed: final_gap <= 2.0 * resolution,
        steps,
        monotone_after_first,
        monotone_slack: slack,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainVerdict {
    /// `d_H(chain_0 ∪ ... ∪ chain_n, limit)` for each `n`.
    pub gaps: Vec<f64>,
    pub final_gap: f64,
    pub tol: f64,
    pub monotone: bool,
    pub passed: bool,
}

/// Gaps may grow by rounding only.
const CHAIN_MONOTONE_SLACK: f64 = 1e-12;

/// Checks that the unions of a nondecreasing chain approach `limit` monotonically and end
/// within `tol` of it. Each element must lie within `tol` of the next.
pub fn chain_limit_check(chain: &[PointCloud], limit: &PointCloud, tol: f64) -> Result<ChainVerdict> {
    if chain.is_empty() || limit.is_empty() {
        return Err(GeoError::EmptyCloud);
    }
    for c in chain {
        if c.space() != limit.space() {
            return Err(GeoError::KindMismatch { expected: limit.space().to_string(), found: c.space().to_string() });
        }
        if c.is_empty() {
            return Err(GeoError::EmptyCloud);
        }
    }
    for (i, w) in chain.windows(2).enumerate() {
        if !w[0].is_subset_of(&w[1], tol)? {
            return Err(GeoError::NotNested { index: i });
        }
    }
    let mut union = chain[0].clone();
    let mut gaps = vec![hausdorff(&union, limit)?];
    for c in &chain[1..] {
        union = union.union(c)?;
        gaps.push(hausdorff(&union, limit)?);
    }
    let monotone = gaps.windows(2).all(|w| w[1] <= w[0] + CHAIN_MONOTONE_SLACK);
    let final_gap = *gaps.last().expect("nonempty");
    Ok(ChainVerdict { passed: monotone && final_gap <= tol, gaps, final_gap, tol, monotone })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Point, SpaceDescriptor};
    use crate::threading::threading_chain;

    fn e1(xs: &[f64]) -> PointCloud {
        PointCloud::new(SpaceDescriptor::Euclidean { dim: 1 }, xs.iter().map(|&x| Point::euclidean([x])).collect(), 1e-6)
            .unwrap()
    }

    #[test]
    fn fps_order_starts_at_endpoints_in_1d() {
        let c = e1(&(0..=20).map(|i| i as f64 / 20.0).collect::<Vec<_>>());
        let order = farthest_point_order(&c, 3);
        let mut ends = [order[0], order[1]];
        ends.sort();
        assert_eq!(ends, [0, 20]);
        assert_eq!(order.len(), 21);
    }

    #[test]
    fn sizes_are_geometric() {
        assert_eq!(geometric_sizes(500, 10).first(), Some(&1));
        assert_eq!(geometric_sizes(500, 10).last(), Some(&500));
        assert!(geometric_sizes(500, 10).windows(2).all(|w| w[0] < w[1]));
        assert_eq!(geometric_sizes(1, 5), vec![1]);
    }

    #[test]
    fn segment_target_converges_at_two_points() {
        let c = e1(&(0..=40).map(|i| i as f64 / 20.0).collect::<Vec<_>>());
        let res = sampling_resolution(&c);
        let p = ConvergenceParams { n_steps: 4, ..Default::default() };
        let r = increasing_hull_convergence(&c, &p, 1).unwrap();
        assert!(r.passed, "{r:?}");
        // after the two endpoints the hull is the whole segment
        let order = farthest_point_order(&c, 1);
        let ends = PointCloud::new(c.space().clone(), vec![c.points()[order[0]].clone(), c.points()[order[1]].clone()], 1e-6).unwrap();
        let (hull, _) = convex_hull_cloud(&ends, 1e-2, 4, &ThreadingParams::default()).unwrap();
        assert!(hausdorff(&hull, &c).unwrap() <= res);
    }

    #[test]
    fn single_point_target() {
        let r = increasing_hull_convergence(&e1(&[0.3]), &ConvergenceParams::default(), 0).unwrap();
        assert_eq!(r.steps.len(), 1);
        assert_eq!(r.final_gap, 0.0);
        assert!(r.passed);
    }

    #[test]
    fn chain_examples() {
        let a = e1(&[0.0, 1.0]);
        let v = chain_limit_check(&[a.clone(), a.clone(), a.clone()], &a, 1e-9).unwrap();
        assert!(v.passed);
        assert_eq!(v.gaps, vec![0.0; 3]);

        let sq = PointCloud::new(
            SpaceDescriptor::Euclidean { dim: 2 },
            [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]].into_iter().map(Point::euclidean).collect(),
            1e-6,
        )
        .unwrap();
        let (chain, report) = threading_chain(&sq, 3, &ThreadingParams::default()).unwrap();
        let tol = 2.0 * report.records.iter().map(|r| r.resolution).fold(0.0, f64::max);
        let v = chain_limit_check(&chain, chain.last().unwrap(), tol).unwrap();
        assert!(v.passed, "{v:?}");

        let swapped = vec![chain[1].clone(), chain[0].clone()];
        assert_eq!(chain_limit_check(&swapped, &chain[1], 1e-9), Err(GeoError::NotNested { index: 0 }));
    }
}
