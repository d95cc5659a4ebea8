//! Numeric tolerances shared across the crate, centralized so tests and the
//! CLI agree on every threshold.

/// Tolerance constants used by the solver, projections and inference steps.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    /// Coordinate-descent stopping tolerance on the max coefficient change.
    pub cd_tol: f64,
    /// Hard cap on coordinate sweeps before the solver gives up.
    pub max_sweeps: usize,
    /// KKT certificate tolerance at a reported solution.
    pub kkt_tol: f64,
    /// Relative singular-value cutoff for minimum-norm least squares.
    pub rank_rel_tol: f64,
    /// Collinearity threshold: j is flagged when x_j' Q x_j <= collinearity_rel_tol * n.
    pub collinearity_rel_tol: f64,
    /// Standardization check tolerance (mean zero, squared norm n).
    pub standardize_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            cd_tol: 1e-7,
            max_sweeps: 100_000,
            kkt_tol: 1e-6,
            rank_rel_tol: 1e-10,
            collinearity_rel_tol: 1e-10,
            standardize_tol: 1e-10,
        }
    }
}
