//! Numerical thresholds shared by every module.
//!
//! All defaults live in [`Tolerances::DEFAULT`]; call sites read from it
//! instead of repeating literals.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Max |M - M^T| accepted when constructing a symmetric matrix.
    pub symmetry: f64,
    /// Minimum eigenvalue for a matrix to count as positive definite.
    pub pd_min_eig: f64,
    /// Negative slack allowed on the minimum eigenvalue of a PSD matrix.
    pub psd_slack: f64,
    /// Relative pivot threshold (times ||A||_F) for Gaussian elimination.
    pub pivot_rel: f64,
    /// Sweep cap for cyclic Jacobi.
    pub jacobi_max_sweeps: usize,
    /// Off-diagonal threshold (times ||M||_F) for Jacobi convergence.
    pub jacobi_offdiag_rel: f64,
    /// Slack on lambda_max(P_eps) <= 1.
    pub peps_upper_slack: f64,
    /// Lower bound on lambda_min(P_eps).
    pub peps_lower: f64,
    /// Eigenvalue slack for semidefinite ordering checks (P_i >= P_{i+1}).
    pub order_slack: f64,
    /// Successive-estimate tolerance for the Gelfand spectral radius refinement.
    pub gelfand_rel_change: f64,
    /// Maximum power used by the Gelfand estimate.
    pub gelfand_max_power: usize,
    /// Errors below this are treated as zero when forming ratios.
    pub ratio_floor: f64,
}

impl Tolerances {
    pub const DEFAULT: Tolerances = Tolerances {
        symmetry: 1e-10,
        pd_min_eig: 1e-10,
        psd_slack: 1e-10,
        pivot_rel: 1e-12,
        jacobi_max_sweeps: 100,
        jacobi_offdiag_rel: 1e-12,
        peps_upper_slack: 1e-12,
        peps_lower: 1e-12,
        order_slack: 1e-8,
        gelfand_rel_change: 1e-4,
        gelfand_max_power: 1 << 14,
        ratio_floor: 1e-14,
    };
}

impl Default for Tolerances {
    fn default() -> Self {
        Self::DEFAULT
    }
}
