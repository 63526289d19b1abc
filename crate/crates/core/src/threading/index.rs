//! Spatial indexing over flat coordinates.
//!
//! Every shipped space satisfies `|flat(x) - flat(y)| <= d(x, y)`, so the Euclidean
//! distance in flat coordinates is a lower bound for pruning. Final comparisons always
//! use the geodesic distance.

use rayon::prelude::*;
use rustc_hash::FxHashMap;
use smallvec::SmallVec;

use crate::geometry::metric::raw_dist;
use crate::geometry::Point;

/// Hash grids use at most this many leading flat coordinates.
const MAX_GRID_DIMS: usize = 4;
const LEAF_SIZE: usize = 8;
/// Below this many points the FPS distance update runs serially.
const PAR_THRESHOLD: usize = 4096;

pub(crate) struct FlatCoords {
    pub dim: usize,
    /// Flat distance equals the geodesic distance (Euclidean factors only).
    pub exact: bool,
    data: Vec<f64>,
}

fn flat_is_exact(p: &Point) -> bool {
    match p {
        Point::Euclidean(_) => true,
        Point::Biquadrant { .. } => false,
        Point::Product(pair) => flat_is_exact(&pair.0) && flat_is_exact(&pair.1),
    }
}

impl FlatCoords {
    pub fn new(points: &[Point]) -> Self {
        let mut data = Vec::new();
        let mut dim = 0;
        if let Some(first) = points.first() {
            first.write_flat(&mut data);
            dim = data.len();
            data.reserve(dim * points.len());
            for p in &points[1..] {
                p.write_flat(&mut data);
            }
        }
        let exact = points.first().is_some_and(flat_is_exact);
        FlatCoords { dim, exact, data }
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

/// Static kd-tree answering nearest-neighbour queries under the geodesic metric.
#[derive(Debug, Clone)]
pub(crate) struct KdTree {
    dim: usize,
    flat: Vec<f64>,
    perm: Vec<u32>,
    nodes: Vec<Node>,
    bounds: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct Node {
    lo: u32,
    hi: u32,
    left: u32,
    right: u32,
}

impl KdTree {
    pub fn build(points: &[Point]) -> Self {
        let fc = FlatCoords::new(points);
        let mut tree = KdTree {
            dim: fc.dim,
            flat: fc.data,
            perm: (0..points.len() as u32).collect(),
            nodes: Vec::new(),
            bounds: Vec::new(),
        };
        if !points.is_empty() {
            tree.build_node(0, points.len());
        }
        tree
    }

    fn coord(&self, i: u32, k: usize) -> f64 {
        self.flat[i as usize * self.dim + k]
    }

    fn build_node(&mut self, lo: usize, hi: usize) -> u32 {
        let id = self.nodes.len() as u32;
        self.nodes.push(Node { lo: lo as u32, hi: hi as u32, left: 0, right: 0 });
        let dim = self.dim;
        let mut mins = vec![f64::INFINITY; dim];
        let mut maxs = vec![f64::NEG_INFINITY; dim];
        for &i in &self.perm[lo..hi] {
            for k in 0..dim {
                let v = self.flat[i as usize * dim + k];
                mins[k] = mins[k].min(v);
                maxs[k] = maxs[k].max(v);
            }
        }
        self.bounds.extend_from_slice(&mins);
        self.bounds.extend_from_slice(&maxs);
        if hi - lo > LEAF_SIZE {
            let split = (0..dim)
                .max_by(|&a, &b| (maxs[a] - mins[a]).total_cmp(&(maxs[b] - mins[b])))
                .unwrap_or(0);
            if maxs[split] > mins[split] {
                let mid = (lo + hi) / 2;
                let mut slice = std::mem::take(&mut self.perm);
                slice[lo..hi].select_nth_unstable_by(mid - lo, |&a, &b| {
                    self.coord(a, split).total_cmp(&self.coord(b, split))
                });
                self.perm = slice;
                let left = self.build_node(lo, mid);
                let right = self.build_node(mid, hi);
                self.nodes[id as usize].left = left;
                self.nodes[id as usize].right = right;
            }
        }
        id
    }

    fn box_lower_bound(&self, node: u32, q: &[f64]) -> f64 {
        let base = node as usize * 2 * self.dim;
        let mins = &self.bounds[base..base + self.dim];
        let maxs = &self.bounds[base + self.dim..base + 2 * self.dim];
        let mut s = 0.0;
        for k in 0..self.dim {
            let v = q[k];
            let e = if v < mins[k] {
                mins[k] - v
            } else if v > maxs[k] {
                v - maxs[k]
            } else {
                0.0
            };
            s += e * e;
        }
        s.sqrt()
    }

    /// Nearest stored point to `query`; ties resolve to the lowest index.
    pub fn nearest(&self, points: &[Point], query: &Point) -> Option<(usize, f64)> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut q = Vec::with_capacity(self.dim);
        query.write_flat(&mut q);
        let mut best = (usize::MAX, f64::INFINITY);
        let mut stack: SmallVec<[u32; 64]> = SmallVec::new();
        stack.push(0);
        while let Some(id) = stack.pop() {
            if self.box_lower_bound(id, &q) > best.1 {
                continue;
            }
            let node = self.nodes[id as usize];
            if node.left == 0 {
                for &i in &self.perm[node.lo as usize..node.hi as usize] {
                    let i = i as usize;
                    let d = raw_dist(query, &points[i]);
                    if d < best.1 || (d == best.1 && i < best.0) {
                        best = (i, d);
                    }
                }
            } else {
                let bl = self.box_lower_bound(node.left, &q);
                let br = self.box_lower_bound(node.right, &q);
                if bl <= br {
                    stack.push(node.right);
                    stack.push(node.left);
                } else {
                    stack.push(node.left);
                    stack.push(node.right);
                }
            }
        }
        Some(best)
    }
}

/// Uniform hash grid over the leading flat coordinates, used for greedy r-nets.
struct NetGrid {
    cell: f64,
    dims: usize,
    heads: FxHashMap<[i64; MAX_GRID_DIMS], u32>,
    /// Bucket chains: `entries[k] = (point id, next entry or NIL)`.
    entries: Vec<(u32, u32)>,
    offsets: Vec<[i64; MAX_GRID_DIMS]>,
}

const NIL: u32 = u32::MAX;

impl NetGrid {
    fn new(cell: f64, flat_dim: usize) -> Self {
        let dims = flat_dim.min(MAX_GRID_DIMS);
        let mut offsets = vec![[0i64; MAX_GRID_DIMS]];
        for k in 0..dims {
            offsets = offsets
                .into_iter()
                .flat_map(|o| {
                    [-1i64, 0, 1].into_iter().map(move |d| {
                        let mut n = o;
                        n[k] = d;
                        n
                    })
                })
                .collect();
        }
        // probe the point's own cell first
        offsets.sort_by_key(|o| o.iter().map(|v| v.abs()).sum::<i64>());
        NetGrid { cell, dims, heads: FxHashMap::default(), entries: Vec::new(), offsets }
    }

    #[inline]
    fn key(&self, flat: &[f64]) -> [i64; MAX_GRID_DIMS] {
        let mut k = [0i64; MAX_GRID_DIMS];
        for (slot, v) in k.iter_mut().zip(&flat[..self.dims]) {
            *slot = (v / self.cell).floor() as i64;
        }
        k
    }

    fn insert(&mut self, flat: &[f64], id: u32) {
        let k = self.key(flat);
        let slot = self.entries.len() as u32;
        let head = self.heads.entry(k).or_insert(NIL);
        self.entries.push((id, *head));
        *head = slot;
    }

    fn any_within(&self, flat: &[f64], mut pred: impl FnMut(u32) -> bool) -> bool {
        let base = self.key(flat);
        for off in &self.offsets {
            let mut probe = base;
            for k in 0..self.dims {
                probe[k] += off[k];
            }
            let mut e = match self.heads.get(&probe) {
                Some(&h) => h,
                None => continue,
            };
            while e != NIL {
                let (id, next) = self.entries[e as usize];
                if pred(id) {
                    return true;
                }
                e = next;
            }
        }
        false
    }
}

/// Greedy r-net: `forced` indices are kept unconditionally, then each index of `order`
/// is kept iff no kept point lies within distance `r`.
///
/// Returns `None` as soon as more than `limit` points would be kept.
pub(crate) fn greedy_net(
    points: &[Point],
    flat: &FlatCoords,
    forced: &[usize],
    order: impl IntoIterator<Item = usize>,
    r: f64,
    limit: usize,
) -> Option<Vec<usize>> {
    debug_assert!(r > 0.0);
    let mut grid = NetGrid::new(r, flat.dim);
    let mut kept = Vec::with_capacity(forced.len());
    for &i in forced {
        grid.insert(flat.row(i), i as u32);
        kept.push(i);
    }
    if kept.len() > limit {
        return None;
    }
    for i in order {
        let p = &points[i];
        let fi = flat.row(i);
        let hit = grid.any_within(fi, |j| {
            let fj = flat.row(j as usize);
            let sq: f64 = fi.iter().zip(fj).map(|(a, b)| (a - b) * (a - b)).sum();
            sq <= r * r && (flat.exact || raw_dist(p, &points[j as usize]) <= r)
        });
        if !hit {
            grid.insert(flat.row(i), i as u32);
            kept.push(i);
            if kept.len() > limit {
                return None;
            }
        }
    }
    Some(kept)
}

/// Outcome of reducing a point list to at most `target` points.
pub(crate) struct Reduction {
    /// Kept indices in ascending order.
    pub kept: Vec<usize>,
    /// Every dropped point lies within this distance of a kept point.
    pub radius: f64,
}

/// Below this many scanned points the radius search runs on the full order.
const SUBSAMPLE_MIN: usize = 50_000;
/// Radius growth per confirming pass on the full order.
const CONFIRM_STEP: f64 = 1.04;

/// Greedy net with (nearly) the smallest radius whose size fits `target`.
///
/// The radius is bisected on a log scale over a prefix of `order` (a random subsample
/// when `order` is shuffled) and then confirmed on the whole order. `forced` indices are
/// always kept even if that exceeds `target`. When the net at `min_radius` already fits,
/// that net is returned with radius `min_radius`.
pub(crate) fn reduce_by_net(
    points: &[Point],
    flat: &FlatCoords,
    forced: &[usize],
    order: &[usize],
    target: usize,
    min_radius: f64,
    max_radius: f64,
) -> Reduction {
    let limit = target.max(forced.len());
    let min_radius = min_radius.max(f64::MIN_POSITIVE);
    let net = |r: f64, prefix: &[usize]| greedy_net(points, flat, forced, prefix.iter().copied(), r, limit);
    let finish = |mut kept: Vec<usize>, radius: f64| {
        kept.sort_unstable();
        Reduction { kept, radius }
    };
    if let Some(kept) = net(min_radius, order) {
        return finish(kept, min_radius);
    }
    let sample_len = order.len().min(SUBSAMPLE_MIN.max(16 * target));
    let sample = &order[..sample_len];

    // grow the radius until the full order fits
    let sample_limit = if sample_len < order.len() { forced.len().max(limit * 23 / 25) } else { limit };
    let net_sample = |r: f64| greedy_net(points, flat, forced, sample.iter().copied(), r, sample_limit);
    let mut lo = min_radius;
    let mut hi = max_radius.max(lo * 2.0);
    while net_sample(hi).is_none() {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..64 {
        if hi / lo < 1.02 {
            break;
        }
        let mid = (lo * hi).sqrt();
        if net_sample(mid).is_some() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mut r = hi;
    loop {
        if let Some(kept) = net(r, order) {
            return finish(kept, r);
        }
        r *= CONFIRM_STEP;
    }
}

/// Farthest-point selection: starts from `forced` (or `start` when `forced` is empty) and
/// repeatedly adds the point farthest from the current selection, lowest index on ties.
///
/// Returns the selection in pick order together with the covering radius of the selection.
pub(crate) fn farthest_point_select(points: &[Point], forced: &[usize], start: usize, k: usize) -> (Vec<usize>, f64) {
    let n = points.len();
    if n == 0 {
        return (Vec::new(), 0.0);
    }
    let mut selected: Vec<usize> = if forced.is_empty() { vec![start] } else { forced.to_vec() };
    let mut mind = vec![f64::INFINITY; n];
    let update = |mind: &mut [f64], s: usize| {
        let ps = &points[s];
        if n >= PAR_THRESHOLD {
            mind.par_iter_mut().zip(points.par_iter()).for_each(|(m, p)| {
                let d = raw_dist(ps, p);
                if d < *m {
                    *m = d;
                }
            });
        } else {
            for (m, p) in mind.iter_mut().zip(points) {
                let d = raw_dist(ps, p);
                if d < *m {
                    *m = d;
                }
            }
        }
    };
    for &s in &selected {
        update(&mut mind, s);
    }
    let argmax = |mind: &[f64]| {
        let mut best = (0usize, f64::NEG_INFINITY);
        for (i, &m) in mind.iter().enumerate() {
            if m > best.1 {
                best = (i, m);
            }
        }
        best
    };
    while selected.len() < k.min(n) {
        let (i, m) = argmax(&mind);
        if m <= 0.0 {
            break;
        }
        selected.push(i);
        update(&mut mind, i);
    }
    let radius = argmax(&mind).1.max(0.0);
    (selected, radius)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Quadrant, SpaceDescriptor};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn brute_nearest(points: &[Point], q: &Point) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        for (i, p) in points.iter().enumerate() {
            let d = raw_dist(q, p);
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }

    #[test]
    fn kdtree_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for spec in ["euclidean:3", "biquadrant", "product(biquadrant,euclidean:2)"] {
            let space: SpaceDescriptor = spec.parse().unwrap();
            let pts: Vec<Point> = (0..700).map(|_| space.sample_point(&mut rng, 3.0)).collect();
            let tree = KdTree::build(&pts);
            for _ in 0..200 {
                let q = space.sample_point(&mut rng, 4.0);
                let (i, d) = tree.nearest(&pts, &q).unwrap();
                let (bi, bd) = brute_nearest(&pts, &q);
                assert_eq!(d, bd, "{spec}");
                assert_eq!(i, bi, "{spec}");
            }
        }
    }

    #[test]
    fn biquadrant_lower_bound_across_quadrants() {
        // nearest in the plane is in the other quadrant, nearest geodesically is not
        let pts = vec![
            Point::biquadrant(Quadrant::Minus, -0.1, -0.1).unwrap(),
            Point::biquadrant(Quadrant::Plus, 1.0, 1.0).unwrap(),
        ];
        let q = Point::biquadrant(Quadrant::Plus, 0.9, 0.0).unwrap();
        let tree = KdTree::build(&pts);
        assert_eq!(tree.nearest(&pts, &q).unwrap().0, 1);
    }

    #[test]
    fn greedy_net_covers_and_separates() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let space = SpaceDescriptor::Biquadrant;
        let pts: Vec<Point> = (0..2000).map(|_| space.sample_point(&mut rng, 1.0)).collect();
        let flat = FlatCoords::new(&pts);
        let r = 0.1;
        let kept = greedy_net(&pts, &flat, &[5], 0..pts.len(), r, usize::MAX).unwrap();
        assert_eq!(kept[0], 5);
        for (a, &i) in kept.iter().enumerate() {
            for &j in &kept[a + 1..] {
                assert!(raw_dist(&pts[i], &pts[j]) > r);
            }
        }
        for p in &pts {
            assert!(kept.iter().any(|&k| raw_dist(p, &pts[k]) <= r));
        }
        assert!(greedy_net(&pts, &flat, &[], 0..pts.len(), r, 3).is_none());
    }

    #[test]
    fn reduce_by_net_respects_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let space = SpaceDescriptor::Euclidean { dim: 2 };
        let pts: Vec<Point> = (0..5000).map(|_| space.sample_point(&mut rng, 1.0)).collect();
        let flat = FlatCoords::new(&pts);
        let order: Vec<usize> = (3..pts.len()).collect();
        let red = reduce_by_net(&pts, &flat, &[0, 1, 2], &order, 400, 1e-6, 3.0);
        assert!(red.kept.len() <= 400);
        assert!(red.kept.len() > 250, "{}", red.kept.len());
        assert!(red.kept.starts_with(&[0, 1, 2]));
        for p in &pts {
            assert!(red.kept.iter().any(|&k| raw_dist(p, &pts[k]) <= red.radius));
        }
    }

    #[test]
    fn fps_simple() {
        let pts: Vec<Point> = [0.0, 1.0, 0.4, 0.9, 0.5].iter().map(|&x| Point::euclidean([x])).collect();
        let (sel, r) = farthest_point_select(&pts, &[], 0, 3);
        assert_eq!(sel, vec![0, 1, 4]);
        assert!((r - 0.1).abs() < 1e-12);
    }
}
