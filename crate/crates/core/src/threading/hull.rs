//! Exact convex-hull distance in Euclidean space (Wolfe's minimum-norm-point algorithm).

use nalgebra::{DMatrix, DVector};

use crate::error::{GeoError, Result};
use crate::geometry::Point;

const MAX_MAJOR: usize = 1_000;
const MAX_MINOR: usize = 1_000;

fn euclidean_coords(p: &Point, dim: Option<usize>) -> Result<&[f64]> {
    match p {
        Point::Euclidean(c) => {
            if let Some(d) = dim {
                if c.len() != d {
                    return Err(GeoError::KindMismatch { expected: format!("euclidean:{d}"), found: format!("euclidean:{}", c.len()) });
                }
            }
            Ok(c)
        }
        other => Err(GeoError::Unsupported(format!("hull oracle needs Euclidean points, got {}", other.kind_name()))),
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `|sum a_i q_i|` over the affine hull of the active set.
fn affine_min_norm(q: &[Vec<f64>], active: &[usize]) -> Vec<f64> {
    let m = active.len();
    let mut kkt = DMatrix::zeros(m + 1, m + 1);
    for (a, &i) in active.iter().enumerate() {
        for (b, &j) in active.iter().enumerate() {
            kkt[(a, b)] = dot(&q[i], &q[j]);
        }
        kkt[(a, m)] = 1.0;
        kkt[(m, a)] = 1.0;
    }
    let mut rhs = DVector::zeros(m + 1);
    rhs[m] = 1.0;
    let sol = kkt
        .clone()
        .lu()
        .solve(&rhs)
        .filter(|s| s.iter().all(|v| v.is_finite()))
        .unwrap_or_else(|| kkt.pseudo_inverse(1e-14).map(|p| p * &rhs).unwrap_or_else(|_| DVector::from_element(m + 1, 1.0 / m as f64)));
    sol.iter().take(m).copied().collect()
}

/// Distance from `z` to the convex hull of `points` (all in the same Euclidean space).
pub fn euclidean_hull_distance(points: &[Point], z: &Point) -> Result<f64> {
    let zc = euclidean_coords(z, None)?;
    let dim = zc.len();
    if points.is_empty() {
        return Err(GeoError::EmptyCloud);
    }
    let q: Vec<Vec<f64>> = points
        .iter()
        .map(|p| euclidean_coords(p, Some(dim)).map(|c| c.iter().zip(zc).map(|(a, b)| a - b).collect()))
        .collect::<Result<_>>()?;
    let scale = q.iter().map(|v| dot(v, v)).fold(0.0, f64::max);
    if scale == 0.0 {
        return Ok(0.0);
    }
    let tol = 1e-15 * scale;

    let first = (0..q.len()).min_by(|&a, &b| dot(&q[a], &q[a]).total_cmp(&dot(&q[b], &q[b]))).expect("nonempty");
    let mut active = vec![first];
    let mut lambda = vec![1.0];
    let mut x = q[first].clone();

    let combine = |active: &[usize], lambda: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for (&i, &l) in active.iter().zip(lambda) {
            for (o, v) in out.iter_mut().zip(&q[i]) {
                *o += l * v;
            }
        }
        out
    };

    for _ in 0..MAX_MAJOR {
        let xx = dot(&x, &x);
        if xx <= tol {
            return Ok(0.0);
        }
        let j = (0..q.len()).min_by(|&a, &b| dot(&x, &q[a]).total_cmp(&dot(&x, &q[b]))).expect("nonempty");
        if dot(&x, &q[j]) >= xx - 1e-12 * scale || active.contains(&j) {
            break;
        }
        active.push(j);
        lambda.push(0.0);
        for _ in 0..MAX_MINOR {
            let alpha = affine_min_norm(&q, &active);
            if alpha.iter().all(|&a| a > 1e-14) {
                lambda = alpha;
                break;
            }
            let mut theta = 1.0f64;
            for (&l, &a) in lambda.iter().zip(&alpha) {
                if a <= 1e-14 && l - a > 0.0 {
                    theta = theta.min(l / (l - a));
                }
            }
            for (l, a) in lambda.iter_mut().zip(&alpha) {
                *l += theta * (a - *l);
            }
            let mut k = 0;
            while k < active.len() {
                if lambda[k] <= 1e-14 {
                    active.remove(k);
                    lambda.remove(k);
                } else {
                    k += 1;
                }
            }
            let s: f64 = lambda.iter().sum();
            lambda.iter_mut().for_each(|l| *l /= s);
        }
        x = combine(&active, &lambda);
    }
    Ok(dot(&x, &x).sqrt())
}

/// `z` is within `tol` of the convex hull of `points`.
pub fn euclidean_hull_membership(points: &[Point], z: &Point, tol: f64) -> Result<bool> {
    Ok(euclidean_hull_distance(points, z)? <= tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pts(v: &[&[f64]]) -> Vec<Point> {
        v.iter().map(|c| Point::euclidean(c.iter().copied())).collect()
    }

    #[test]
    fn triangle_examples() {
        let s = pts(&[&[0.0, 0.0], &[2.0, 0.0], &[0.0, 2.0]]);
        assert!(euclidean_hull_membership(&s, &Point::euclidean([2.0 / 3.0, 2.0 / 3.0]), 1e-9).unwrap());
        assert!(!euclidean_hull_membership(&s, &Point::euclidean([2.0, 2.0]), 1e-9).unwrap());
        let d = euclidean_hull_distance(&s, &Point::euclidean([2.0, 2.0])).unwrap();
        assert!((d - 2f64.sqrt()).abs() < 1e-12);
        let x = pts(&[&[0.3, -1.0]]);
        assert!(euclidean_hull_membership(&x, &x[0], 1e-12).unwrap());
    }

    #[test]
    fn rejects_other_spaces() {
        let b = vec![Point::biquadrant(crate::geometry::Quadrant::Plus, 1.0, 0.0).unwrap()];
        assert!(matches!(euclidean_hull_membership(&b, &b[0], 1e-9), Err(GeoError::Unsupported(_))));
        assert_eq!(euclidean_hull_distance(&[], &Point::euclidean([0.0])), Err(GeoError::EmptyCloud));
    }

    fn barycentric_inside(simplex: &[&[f64]], z: &[f64]) -> bool {
        let d = z.len();
        let m = DMatrix::from_fn(d, d, |r, c| simplex[c + 1][r] - simplex[0][r]);
        let rhs = DVector::from_fn(d, |r, _| z[r] - simplex[0][r]);
        match m.lu().solve(&rhs) {
            Some(l) => l.iter().all(|&v| v >= -1e-12) && l.sum() <= 1.0 + 1e-12,
            None => false,
        }
    }

    /// Caratheodory: z is in the hull iff it is in the hull of some (d+1)-subset.
    fn exhaustive_inside(s: &[Vec<f64>], z: &[f64]) -> bool {
        let n = s.len();
        let d = z.len();
        assert!(d == 2 || d == 3);
        for a in 0..n {
            for b in a + 1..n {
                for c in b + 1..n {
                    if d == 2 {
                        if barycentric_inside(&[&s[a], &s[b], &s[c]], z) {
                            return true;
                        }
                        continue;
                    }
                    for e in c + 1..n {
                        if barycentric_inside(&[&s[a], &s[b], &s[c], &s[e]], z) {
                            return true;
                        }
                    }
                }
            }
        }
        false
    }

    #[test]
    fn agrees_with_exhaustive_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for d in [2usize, 3] {
            for _ in 0..40 {
                let n = rng.random_range(d + 1..=8);
                let s: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
                let cloud: Vec<Point> = s.iter().map(|c| Point::euclidean(c.iter().copied())).collect();
                for _ in 0..25 {
                    let z: Vec<f64> = (0..d).map(|_| rng.random_range(-1.2..1.2)).collect();
                    let dist = euclidean_hull_distance(&cloud, &Point::euclidean(z.iter().copied())).unwrap();
                    if dist > 1e-6 {
                        assert!(!exhaustive_inside(&s, &z));
                    } else {
                        assert!(dist < 1e-10, "{dist}");
                        assert!(exhaustive_inside(&s, &z));
                    }
                }
            }
        }
    }

    #[test]
    fn distance_to_segment() {
        let s = pts(&[&[0.0, 0.0, 0.0], &[2.0, 0.0, 0.0]]);
        let d = euclidean_hull_distance(&s, &Point::euclidean([1.0, 3.0, 4.0])).unwrap();
        assert!((d - 5.0).abs() < 1e-12);
        let d = euclidean_hull_distance(&s, &Point::euclidean([-3.0, 4.0, 0.0])).unwrap();
        assert!((d - 5.0).abs() < 1e-12);
    }
}
