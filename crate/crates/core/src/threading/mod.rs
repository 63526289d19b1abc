//! Threading operator, iterated threading, Hausdorff distance and degree estimation on
//! finite point clouds.

pub mod cloud;
pub mod hull;
pub(crate) mod index;
pub mod laws;
pub mod ops;

pub use cloud::{hausdorff, PointCloud};
pub use hull::{euclidean_hull_distance, euclidean_hull_membership};
pub use laws::{equivariance_check, product_rule_check, thread_algebra_check};
pub use ops::{
    convex_hull_cloud, estimate_degree, iterate_threading, member_thr1, thr1_witness, thread_once, thread_step,
    stabilizing_chain, threading_chain, DegreeEstimate, IterationRecord, StepStats, ThreadingParams, ThreadingReport,
};
