//! Every numerical tolerance used across the crate, in one place.

/// Relative singular-value cutoff; the absolute cutoff is
/// `RANK_TOL_FACTOR * max(rows, cols) * s_max`.
pub const RANK_TOL_FACTOR: f64 = 1e-10;

/// Absolute per-row residual allowed for an LP solution reported optimal.
pub const FEAS_TOL: f64 = 1e-8;

/// Relative objective accuracy promised by the LP solver.
pub const OBJ_TOL: f64 = 1e-7;

/// Reduced costs below `-COST_TOL * scale` make a column eligible to enter.
pub const COST_TOL: f64 = 1e-10;

/// Smallest admissible pivot magnitude in the simplex ratio test.
pub const PIVOT_TOL: f64 = 1e-11;

/// Entrywise tolerance for `F Fᵀ = I` when flagging Parseval frames.
pub const PARSEVAL_TOL: f64 = 1e-9;

/// Relative cutoff (times `‖F‖₂`) below which a d-column submatrix is singular.
pub const SPARK_TOL_FACTOR: f64 = 1e-10;

/// Maximum number of enumerated subproblems before a certified check refuses.
pub const ENUMERATION_CAP: u64 = 200_000;

/// Symmetry tolerance accepted by the symmetric eigensolver.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// NSP programs with optimum above `-NSP_MARGIN` count as violations.
pub const NSP_MARGIN: f64 = 1e-9;

/// Re-evaluation tolerance for certified-failure witnesses.
pub const WITNESS_TOL: f64 = 1e-9;

/// Iteration cap for the first-order decoders.
pub const ADMM_MAX_ITER: usize = 50_000;

/// Stopping threshold on primal change and residuals of the first-order
/// decoders, in normalized units (`‖A‖₂ = 1`, `‖y‖₂ = 1`).
pub const ADMM_TOL: f64 = 1e-10;

/// Feasibility required of a decoder result flagged optimal, relative to
/// `max(1, ‖y‖₂)`.
pub const DECODE_FEAS_TOL: f64 = 1e-6;

/// Failure probability behind the Hoeffding radius of small-ball estimates.
pub const HOEFFDING_DELTA: f64 = 0.01;

/// Multiplicative slack in moment-growth checks.
pub const MOMENT_SLACK: f64 = 0.2;

/// Default relative l2 error below which a trial counts as recovered.
pub const SUCCESS_THRESHOLD: f64 = 1e-4;

/// `4/√41`: RIP constants below this give `ρ < 1` in the RIP→RNSP transfer.
pub fn rip_rnsp_threshold() -> f64 {
    4.0 / 41f64.sqrt()
}

/// Relative slack on the off-support correlations when certifying a
/// polished QCBP solution.
pub const POLISH_TOL: f64 = 1e-9;
