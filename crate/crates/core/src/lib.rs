//! Geodesic toolkit for CAT(0) model spaces: Euclidean space, the bi-quadrant plane and
//! their l2-products.
//!
//! * [`geometry`]: spaces, points, distances, geodesics, isometries and CAT(0) checks.
//! * [`threading`]: the threading operator on point clouds, convex-hull approximation by
//!   iterated threading and threading-degree estimation.
//! * [`frechet`]: Frechet mean and median solvers with hull-membership certificates.
//! * [`convergence`]: set-convergence experiments for increasing chains and hulls.

pub mod config;
pub mod convergence;
pub mod error;
pub mod frechet;
pub mod geometry;
pub mod threading;

pub use error::{GeoError, Result};
pub use geometry::{Isometry, Point, Quadrant, SpaceDescriptor};
pub use threading::{PointCloud, ThreadingParams};
