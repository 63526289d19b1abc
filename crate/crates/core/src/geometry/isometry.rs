use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::point::Point;
use super::space::SpaceDescriptor;
use crate::error::{GeoError, Result};

const ORTHOGONALITY_TOL: f64 = 1e-12;

/// Distance-preserving self-map of one of the shipped spaces.
#[derive(Debug, Clone, PartialEq)]
pub enum Isometry {
    Identity,
    /// `x -> Q x + v` with `Q^T Q = I`.
    EuclideanRigid { q: DMatrix<f64>, v: DVector<f64> },
    /// `x -> -x`, exchanging the two quadrants.
    BiquadrantSwap,
    ProductPair(Box<Isometry>, Box<Isometry>),
}

impl Isometry {
    pub fn euclidean_rigid(q: DMatrix<f64>, v: DVector<f64>) -> Result<Self> {
        if !q.is_square() || q.nrows() != v.len() || v.is_empty() {
            return Err(GeoError::InvalidIsometry(format!(
                "shape mismatch: Q is {}x{}, v has {} entries",
                q.nrows(),
                q.ncols(),
                v.len()
            )));
        }
        let gram = q.transpose() * &q;
        let err = (gram - DMatrix::identity(q.nrows(), q.nrows())).amax();
        if err.is_nan() || err > ORTHOGONALITY_TOL {
            return Err(GeoError::InvalidIsometry(format!("Q^T Q deviates from I by {err:e}")));
        }
        Ok(Isometry::EuclideanRigid { q, v })
    }

    pub fn translation(v: &[f64]) -> Result<Self> {
        Self::euclidean_rigid(DMatrix::identity(v.len(), v.len()), DVector::from_column_slice(v))
    }

    /// Planar rotation by `theta` about the origin.
    pub fn rotation_2d(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        let q = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
        Isometry::EuclideanRigid { q, v: DVector::zeros(2) }
    }

    pub fn product_pair(left: Isometry, right: Isometry) -> Self {
        Isometry::ProductPair(Box::new(left), Box::new(right))
    }

    /// Errors unless the isometry can act on `space`.
    pub fn check_space(&self, space: &SpaceDescriptor) -> Result<()> {
        let mismatch = || GeoError::KindMismatch { expected: space.to_string(), found: self.kind_name() };
        match (self, space) {
            (Isometry::Identity, _) => Ok(()),
            (Isometry::EuclideanRigid { v, .. }, SpaceDescriptor::Euclidean { dim }) if v.len() == *dim => Ok(()),
            (Isometry::BiquadrantSwap, SpaceDescriptor::Biquadrant) => Ok(()),
            (Isometry::ProductPair(l, r), SpaceDescriptor::Product { left, right }) => {
                l.check_space(left)?;
                r.check_space(right)
            }
            _ => Err(mismatch()),
        }
    }

    fn kind_name(&self) -> String {
        match self {
            Isometry::Identity => "identity".into(),
            Isometry::EuclideanRigid { v, .. } => format!("euclidean-rigid on euclidean:{}", v.len()),
            Isometry::BiquadrantSwap => "biquadrant-swap".into(),
            Isometry::ProductPair(l, r) => format!("product-pair({}, {})", l.kind_name(), r.kind_name()),
        }
    }

    pub fn apply(&self, x: &Point) -> Result<Point> {
        match (self, x) {
            (Isometry::Identity, _) => Ok(x.clone()),
            (Isometry::EuclideanRigid { q, v }, Point::Euclidean(c)) if c.len() == v.len() => {
                let y = q * DVector::from_column_slice(c) + v;
                Ok(Point::euclidean(y.iter().copied()))
            }
            (Isometry::BiquadrantSwap, Point::Biquadrant { quadrant, xy }) => {
                Ok(Point::biquadrant_clamped(quadrant.opposite(), -xy[0], -xy[1]))
            }
            (Isometry::ProductPair(l, r), Point::Product(pair)) => {
                Ok(Point::product(l.apply(&pair.0)?, r.apply(&pair.1)?))
            }
            _ => Err(GeoError::KindMismatch { expected: self.kind_name(), found: x.kind_name().into() }),
        }
    }

    pub fn inverse(&self) -> Isometry {
        match self {
            Isometry::Identity => Isometry::Identity,
            Isometry::EuclideanRigid { q, v } => {
                let qt = q.transpose();
                let w = -(&qt * v);
                Isometry::EuclideanRigid { q: qt, v: w }
            }
            Isometry::BiquadrantSwap => Isometry::BiquadrantSwap,
            Isometry::ProductPair(l, r) => Isometry::product_pair(l.inverse(), r.inverse()),
        }
    }

    /// Random isometry of `space`: Haar-like orthogonal part and a translation drawn from
    /// `[-radius, radius]^d` for Euclidean factors, the swap for the biquadrant.
    pub fn random<R: Rng + ?Sized>(space: &SpaceDescriptor, rng: &mut R, radius: f64) -> Isometry {
        match space {
            SpaceDescriptor::Euclidean { dim } => {
                let n = *dim;
                let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
                let qr = g.qr();
                let mut q = qr.q();
                let r = qr.r();
                // fix column signs: Haar-distributed Q
                for j in 0..n {
                    if r[(j, j)] < 0.0 {
                        q.column_mut(j).neg_mut();
                    }
                }
                let v = DVector::from_fn(n, |_, _| rng.random_range(-radius..=radius));
                Isometry::EuclideanRigid { q, v }
            }
            SpaceDescriptor::Biquadrant => Isometry::BiquadrantSwap,
            SpaceDescriptor::Product { left, right } => {
                Isometry::product_pair(Isometry::random(left, rng, radius), Isometry::random(right, rng, radius))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::metric::raw_dist;
    use crate::geometry::point::Quadrant;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn translation_example() {
        let phi = Isometry::translation(&[1.0, 0.0]).unwrap();
        assert_eq!(phi.apply(&Point::euclidean([0.0, 0.0])).unwrap(), Point::euclidean([1.0, 0.0]));
    }

    #[test]
    fn swap_example_and_involution() {
        let x = Point::biquadrant(Quadrant::Plus, 1.0, 2.0).unwrap();
        let y = Isometry::BiquadrantSwap.apply(&x).unwrap();
        assert_eq!(y, Point::biquadrant(Quadrant::Minus, -1.0, -2.0).unwrap());
        assert_eq!(Isometry::BiquadrantSwap.apply(&y).unwrap(), x);
        let o = Point::biquadrant(Quadrant::Plus, 0.0, 0.0).unwrap();
        assert_eq!(Isometry::BiquadrantSwap.apply(&o).unwrap(), o);
    }

    #[test]
    fn rejects_non_orthogonal() {
        let q = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(Isometry::euclidean_rigid(q, DVector::zeros(2)).is_err());
        let q = DMatrix::identity(2, 2);
        assert!(Isometry::euclidean_rigid(q, DVector::zeros(3)).is_err());
    }

    #[test]
    fn random_isometries_are_valid_and_invertible() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let space: SpaceDescriptor = "product(euclidean:3,biquadrant)".parse().unwrap();
        for _ in 0..50 {
            let phi = Isometry::random(&space, &mut rng, 5.0);
            phi.check_space(&space).unwrap();
            if let Isometry::ProductPair(l, _) = &phi {
                if let Isometry::EuclideanRigid { q, v } = l.as_ref() {
                    Isometry::euclidean_rigid(q.clone(), v.clone()).unwrap();
                }
            }
            let inv = phi.inverse();
            let x = space.sample_point(&mut rng, 10.0);
            let y = space.sample_point(&mut rng, 10.0);
            let back = inv.apply(&phi.apply(&x).unwrap()).unwrap();
            assert!(raw_dist(&back, &x) < 1e-12);
            let d0 = raw_dist(&x, &y);
            let d1 = raw_dist(&phi.apply(&x).unwrap(), &phi.apply(&y).unwrap());
            assert!((d0 - d1).abs() < 1e-9);
        }
    }

    #[test]
    fn kind_mismatch() {
        let x = Point::euclidean([1.0, 2.0]);
        assert!(Isometry::BiquadrantSwap.apply(&x).is_err());
        assert!(Isometry::translation(&[1.0]).unwrap().apply(&x).is_err());
        assert!(Isometry::BiquadrantSwap.check_space(&SpaceDescriptor::Euclidean { dim: 2 }).is_err());
    }

    proptest::proptest! {
        #[test]
        fn isometries_preserve_distances(i in 0..4usize, seed in proptest::prelude::any::<u64>()) {
            let space: SpaceDescriptor =
                ["euclidean:2", "euclidean:4", "biquadrant", "product(euclidean:2,biquadrant)"][i].parse().unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let phi = Isometry::random(&space, &mut rng, 10.0);
            let x = space.sample_point(&mut rng, 10.0);
            let y = space.sample_point(&mut rng, 10.0);
            let (px, py) = (phi.apply(&x).unwrap(), phi.apply(&y).unwrap());
            space.check_point(&px).unwrap();
            proptest::prop_assert!((raw_dist(&px, &py) - raw_dist(&x, &y)).abs() <= 1e-9);
        }
    }
}
