//! Default parameters shared by the library and the command-line driver.

pub const DEFAULT_GRID_K: usize = 33;
pub const DEFAULT_CAP: usize = 20_000;
pub const DEFAULT_DEDUP_EPS: f64 = 1e-6;
/// Stabilization tolerance for hull and degree runs.
pub const DEFAULT_EPS: f64 = 1e-2;
pub const DEFAULT_N_MAX: usize = 6;
pub const DEFAULT_MAX_CANDIDATES: usize = 2_000_000;
pub const DEFAULT_REFINE_STEPS: usize = 3;
pub const DEFAULT_TRIALS: usize = 10_000;
