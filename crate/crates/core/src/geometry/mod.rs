//! Model spaces, points, geodesics and isometries.

pub mod checks;
pub mod isometry;
pub mod metric;
pub mod point;
pub mod space;

pub use checks::{check_space, is_flat_sample, DefectWitness, FlatVerdict, SpaceCheckReport};
pub use isometry::Isometry;
pub use metric::{cat0_defect, dist, interpolate};
pub use point::{Coords, Point, Quadrant};
pub use space::SpaceDescriptor;

/// Two points are treated as the same point when they are this close.
pub const POINT_EQ_TOL: f64 = 1e-9;
