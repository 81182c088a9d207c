//! ℓ₁ decoders and the closed-form recovery error bounds.
//!
//! `basis_pursuit_eq` is solved exactly as a linear program. The
//! η-constrained programs share one ADMM solver for
//! `min ‖G z‖₁ s.t. ‖A z − y‖₂ ≤ η`: `G = I` gives QCBP, `G = Fᵀ` the
//! analysis decoder, and QCBP on `A F` the synthesis decoder. QCBP
//! results are then polished to the exact optimum on the detected support
//! whenever that optimum can be certified.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::Frame;
use crate::numerics::{
    min_l1_equality, norm1, norm2, project_ball_in_place, range_basis, soft, solve_lp, spectral_norm, sub, Cholesky,
    DenseMatrix, LpProblem, LpStatus, Vector,
};
use crate::tolerances::{ADMM_MAX_ITER, ADMM_TOL, DECODE_FEAS_TOL, POLISH_TOL};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeStatus {
    Optimal,
    MaxIter,
    Infeasible,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecodeResult {
    pub z_hat: Vector,
    /// Coefficient estimate, synthesis only.
    pub x_hat: Option<Vector>,
    pub objective: f64,
    /// `max(‖A z_hat − y‖₂ − η, 0)`.
    pub feasibility_residual: f64,
    pub iterations: usize,
    pub status: DecodeStatus,
}

fn check_inputs(a: &DenseMatrix, y: &[f64], eta: f64) -> Result<()> {
    if y.len() != a.rows() {
        return Err(Error::shape(format!("y has length {} but A has {} rows", y.len(), a.rows())));
    }
    if y.iter().any(|v| !v.is_finite()) || a.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("decoder input"));
    }
    if !(eta >= 0.0) || !eta.is_finite() {
        return Err(Error::invalid(format!("noise level must be finite and ≥ 0, got {eta}")));
    }
    Ok(())
}

fn feasibility(a: &DenseMatrix, z: &[f64], y: &[f64], eta: f64) -> f64 {
    let r = a.matvec(z).expect("shape checked");
    (norm2(&sub(&r, y)) - eta).max(0.0)
}

fn trivial(d: usize, y: &[f64], eta: f64) -> DecodeResult {
    DecodeResult {
        z_hat: Vector::zeros(d),
        x_hat: None,
        objective: 0.0,
        feasibility_residual: (norm2(y) - eta).max(0.0),
        iterations: 0,
        status: DecodeStatus::Optimal,
    }
}

fn infeasible(d: usize, y: &[f64], eta: f64) -> DecodeResult {
    DecodeResult { status: DecodeStatus::Infeasible, ..trivial(d, y, eta) }
}

/// `min ‖z‖₁ s.t. A z = y`, as a linear program.
pub fn basis_pursuit_eq(a: &DenseMatrix, y: &[f64]) -> Result<DecodeResult> {
    check_inputs(a, y, 0.0)?;
    let d = a.cols();
    if y.iter().all(|&v| v == 0.0) {
        return Ok(trivial(d, y, 0.0));
    }
    let (sol, z) = min_l1_equality(a, y)?;
    match sol.status {
        LpStatus::Optimal => Ok(DecodeResult {
            feasibility_residual: feasibility(a, &z, y, 0.0),
            objective: norm1(&z),
            z_hat: z.into(),
            x_hat: None,
            iterations: sol.iterations,
            status: DecodeStatus::Optimal,
        }),
        LpStatus::Infeasible => Ok(DecodeResult { iterations: sol.iterations, ..infeasible(d, y, 0.0) }),
        LpStatus::Unbounded => Err(Error::Lp("ℓ₁ objective reported unbounded".into())),
    }
}

/// Distance from `y` to the range of `A`.
fn range_distance(a: &DenseMatrix, y: &[f64]) -> Result<f64> {
    let q = range_basis(a)?;
    if q.cols() == 0 {
        return Ok(norm2(y));
    }
    let coeff = q.tmatvec(y)?;
    Ok(norm2(&sub(y, &q.matvec(&coeff)?)))
}

const RHO_UPDATE_EVERY: usize = 50;
const RHO_FREEZE_AFTER: usize = 2_000;

struct AdmmOutput {
    z: Vec<f64>,
    iterations: usize,
    converged: bool,
}

/// ADMM on `min ‖G z‖₁ s.t. ‖A z − y‖₂ ≤ η` with splitting `u = G z`,
/// `r = A z`. `GᵀG + AᵀA` must be positive definite. Inputs are already
/// scaled so that `‖A‖₂ = ‖G‖₂ = ‖y‖₂ = 1`.
fn admm(g: &DenseMatrix, a: &DenseMatrix, y: &[f64], eta: f64) -> Result<AdmmOutput> {
    let (p, d) = g.shape();
    let m = a.rows();
    let gt = g.transpose();
    let at = a.transpose();
    let mut mmat = g.gram();
    let ata = a.gram();
    for (x, v) in mmat.data_mut().iter_mut().zip(ata.data()) {
        *x += v;
    }
    let chol = Cholesky::new(&mmat)?;

    let mut z = vec![0.0; d];
    let mut u = vec![0.0; p];
    let mut r = y.to_vec();
    let mut lam = vec![0.0; p];
    let mut mu = vec![0.0; m];
    let mut rho = 1.0;
    let eps = ADMM_TOL;

    for it in 1..=ADMM_MAX_ITER {
        // z-update: (GᵀG + AᵀA) z = Gᵀ(u − λ) + Aᵀ(r − μ)
        let rhs_g = gt.matvec(&sub(&u, &lam))?;
        let rhs_a = at.matvec(&sub(&r, &mu))?;
        let rhs: Vec<f64> = rhs_g.iter().zip(&rhs_a).map(|(a, b)| a + b).collect();
        z = chol.solve(&rhs);
        let gz = g.matvec(&z)?;
        let az = a.matvec(&z)?;

        let u_old = std::mem::take(&mut u);
        let r_old = std::mem::take(&mut r);
        u = gz.iter().zip(&lam).map(|(x, l)| soft(x + l, 1.0 / rho)).collect();
        r = az.iter().zip(&mu).map(|(x, l)| x + l).collect();
        project_ball_in_place(&mut r, y, eta);

        let mut prim = 0.0;
        for i in 0..p {
            let e = gz[i] - u[i];
            lam[i] += e;
            prim += e * e;
        }
        for i in 0..m {
            let e = az[i] - r[i];
            mu[i] += e;
            prim += e * e;
        }
        let prim = prim.sqrt();
        let du = gt.matvec(&sub(&u, &u_old))?;
        let dr = at.matvec(&sub(&r, &r_old))?;
        let dual = rho * norm2(&du.iter().zip(&dr).map(|(a, b)| a + b).collect::<Vec<_>>());

        let scale_p = norm2(&gz).hypot(norm2(&az)).max(norm2(&u).hypot(norm2(&r)));
        let dual_vec: Vec<f64> = gt.matvec(&lam)?.iter().zip(at.matvec(&mu)?).map(|(a, b)| a + b).collect();
        let scale_d = rho * norm2(&dual_vec);
        let tol_p = eps * ((p + m) as f64).sqrt() + eps * scale_p;
        let tol_d = eps * (d as f64).sqrt() + eps * scale_d;
        if prim <= tol_p && dual <= tol_d {
            return Ok(AdmmOutput { z, iterations: it, converged: true });
        }
        // residual balancing, frozen later on so it cannot keep oscillating;
        // the scaled duals follow ρ
        if it % RHO_UPDATE_EVERY == 0 && it <= RHO_FREEZE_AFTER {
            let f = if prim > 10.0 * dual {
                2.0
            } else if dual > 10.0 * prim {
                0.5
            } else {
                1.0
            };
            if f != 1.0 {
                rho *= f;
                lam.iter_mut().chain(mu.iter_mut()).for_each(|x| *x /= f);
            }
        }
    }
    Ok(AdmmOutput { z, iterations: ADMM_MAX_ITER, converged: false })
}

/// `min ‖G z‖₁ s.t. A z = y` in standard form over
/// `(z⁺, z⁻, t, s⁺, s⁻) ≥ 0` with `±G(z⁺ − z⁻) − t + s± = 0`.
fn equality_lp(g: &DenseMatrix, a: &DenseMatrix, y: &[f64]) -> Result<DecodeResult> {
    let (p, d) = g.shape();
    let m = a.rows();
    let nv = 2 * d + 3 * p;
    let mut lhs = DenseMatrix::zeros(m + 2 * p, nv);
    for i in 0..m {
        for j in 0..d {
            lhs[(i, j)] = a[(i, j)];
            lhs[(i, d + j)] = -a[(i, j)];
        }
    }
    for i in 0..p {
        for (sign, row) in [(1.0, m + i), (-1.0, m + p + i)] {
            for j in 0..d {
                lhs[(row, j)] = sign * g[(i, j)];
                lhs[(row, d + j)] = -sign * g[(i, j)];
            }
            lhs[(row, 2 * d + i)] = -1.0;
        }
        lhs[(m + i, 2 * d + p + i)] = 1.0;
        lhs[(m + p + i, 2 * d + 2 * p + i)] = 1.0;
    }
    let mut cost = vec![0.0; nv];
    cost[2 * d..2 * d + p].iter_mut().for_each(|c| *c = 1.0);
    let mut rhs = y.to_vec();
    rhs.resize(m + 2 * p, 0.0);
    let sol = solve_lp(&LpProblem::nonnegative(cost, lhs, rhs))?;
    match sol.status {
        LpStatus::Optimal => {
            let z: Vec<f64> = (0..d).map(|j| sol.x[j] - sol.x[d + j]).collect();
            Ok(DecodeResult {
                objective: norm1(&g.matvec(&z)?),
                feasibility_residual: feasibility(a, &z, y, 0.0),
                z_hat: z.into(),
                x_hat: None,
                iterations: sol.iterations,
                status: DecodeStatus::Optimal,
            })
        }
        LpStatus::Infeasible => Ok(DecodeResult { iterations: sol.iterations, ..infeasible(d, y, 0.0) }),
        LpStatus::Unbounded => Err(Error::Lp("ℓ₁ objective reported unbounded".into())),
    }
}

/// Shared driver: trivial and infeasible cases, scaling, status.
fn solve_constrained(g: &DenseMatrix, a: &DenseMatrix, y: &[f64], eta: f64) -> Result<DecodeResult> {
    check_inputs(a, y, eta)?;
    let d = a.cols();
    let ny = norm2(y);
    if ny <= eta {
        return Ok(trivial(d, y, eta));
    }
    let tol = DECODE_FEAS_TOL * ny.max(1.0);
    if range_distance(a, y)? > eta + tol {
        return Ok(infeasible(d, y, eta));
    }
    if eta == 0.0 {
        return equality_lp(g, a, y);
    }
    let na = spectral_norm(a)?;
    let ng = spectral_norm(g)?;
    // z = (‖y‖/‖A‖) z'
    let a_s = a.scaled(1.0 / na);
    let g_s = g.scaled(1.0 / ng);
    let y_s: Vec<f64> = y.iter().map(|v| v / ny).collect();
    let out = admm(&g_s, &a_s, &y_s, eta / ny)?;
    let z: Vec<f64> = out.z.iter().map(|v| v * ny / na).collect();
    let feas = feasibility(a, &z, y, eta);
    let status = if out.converged && feas <= tol { DecodeStatus::Optimal } else { DecodeStatus::MaxIter };
    if status == DecodeStatus::MaxIter {
        log::debug!("ADMM stopped after {} iterations, residual {feas:e}", out.iterations);
    }
    Ok(DecodeResult {
        objective: norm1(&g.matvec(&z)?),
        z_hat: z.into(),
        x_hat: None,
        feasibility_residual: feas,
        iterations: out.iterations,
        status,
    })
}

/// `min ‖z‖₁ s.t. ‖A z − y‖₂ ≤ η`.
pub fn qcbp(a: &DenseMatrix, y: &[f64], eta: f64) -> Result<DecodeResult> {
    if eta == 0.0 {
        return basis_pursuit_eq(a, y);
    }
    let res = solve_constrained(&DenseMatrix::identity(a.cols()), a, y, eta)?;
    if res.status == DecodeStatus::Infeasible || res.objective == 0.0 {
        return Ok(res);
    }
    match polish(a, y, eta, &res.z_hat) {
        Some(z) => Ok(DecodeResult {
            objective: norm1(&z),
            feasibility_residual: feasibility(a, &z, y, eta),
            z_hat: z.into(),
            status: DecodeStatus::Optimal,
            ..res
        }),
        None => Ok(res),
    }
}

/// Exact solution on the support and sign pattern of an approximate one.
///
/// On a fixed support `S` with signs `s` the program is
/// `min sᵀx s.t. ‖A_S x − y‖₂ ≤ η`, solved by
/// `x = x_ls − t (A_SᵀA_S)⁻¹ s`. The candidate is returned only if it
/// passes the optimality conditions `sign(x) = s` and
/// `‖Aᵀ(y − A x)‖∞ = t`, so a wrong guess is never reported.
fn polish(a: &DenseMatrix, y: &[f64], eta: f64, z: &[f64]) -> Option<Vec<f64>> {
    let zmax = z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut last: Option<Vec<usize>> = None;
    for thr in [1e-3, 1e-5, 1e-7, 1e-9] {
        let support: Vec<usize> = (0..z.len()).filter(|&i| z[i].abs() > thr * zmax).collect();
        if support.is_empty() || support.len() > a.rows() || last.as_ref() == Some(&support) {
            continue;
        }
        last = Some(support.clone());
        let signs: Vec<f64> = support.iter().map(|&i| z[i].signum()).collect();
        let a_s = a.select_columns(&support);
        let Ok(chol) = Cholesky::new(&a_s.gram()) else { continue };
        let x_ls = chol.solve(&a_s.tmatvec(y).ok()?);
        let r0 = norm2(&sub(&a_s.matvec(&x_ls).ok()?, y));
        let w = chol.solve(&signs);
        let sw: f64 = signs.iter().zip(&w).map(|(s, v)| s * v).sum();
        if r0 >= eta || sw <= 0.0 {
            continue;
        }
        let t = ((eta * eta - r0 * r0) / sw).sqrt();
        let x: Vec<f64> = x_ls.iter().zip(&w).map(|(l, v)| l - t * v).collect();
        if x.iter().zip(&signs).any(|(v, s)| v * s <= 0.0) {
            continue;
        }
        let mut full = vec![0.0; z.len()];
        for (&i, v) in support.iter().zip(&x) {
            full[i] = *v;
        }
        let corr = a.tmatvec(&sub(y, &a.matvec(&full).ok()?)).ok()?;
        if corr.iter().all(|c| c.abs() <= t * (1.0 + POLISH_TOL)) {
            return Some(full);
        }
    }
    None
}

/// `F · argmin{‖x‖₁ : ‖A F x − y‖₂ ≤ η}`.
pub fn l1_synthesis(frame: &Frame, a: &DenseMatrix, y: &[f64], eta: f64) -> Result<DecodeResult> {
    if a.cols() != frame.dim() {
        return Err(Error::shape(format!("A has {} columns, frame lives in R^{}", a.cols(), frame.dim())));
    }
    let af = a.matmul(frame.matrix())?;
    let inner = qcbp(&af, y, eta)?;
    let z = frame.synthesize(&inner.z_hat)?;
    Ok(DecodeResult { z_hat: z.into(), objective: norm1(&inner.z_hat), x_hat: Some(inner.z_hat), ..inner })
}

/// `argmin{‖Fᵀ z‖₁ : ‖A z − y‖₂ ≤ η}`.
pub fn l1_analysis(frame: &Frame, a: &DenseMatrix, y: &[f64], eta: f64) -> Result<DecodeResult> {
    if a.cols() != frame.dim() {
        return Err(Error::shape(format!("A has {} columns, frame lives in R^{}", a.cols(), frame.dim())));
    }
    if !frame.is_parseval() {
        log::warn!("analysis decoding with a non-Parseval frame");
    }
    solve_constrained(&frame.matrix().transpose(), a, y, eta)
}

/// Recovery guarantees with explicit constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum BoundParams {
    /// ℓ₁ error under the ℓ_q robust null space property.
    RnspL1 { rho: f64, tau: f64, k: usize, q: f64 },
    /// ℓ_p error, `1 < p ≤ q`.
    RnspLp { rho: f64, tau: f64, k: usize, p: f64, q: f64 },
    /// ℓ₂ error under the robust width property.
    Rwp { c0: f64, c1: f64, k: usize },
    /// F-norm error for an s-splittable frame with constant β.
    FRnsp { rho: f64, tau: f64, beta: f64 },
    /// ℓ₂ error under the stable F-null space property.
    FSnsp { c: f64, nu_a: f64, n: usize },
    /// ℓ_p error of equality-constrained decoding with user-supplied C, D.
    QpChain { c_const: f64, d_const: f64, k: usize, p: f64, m: usize, d: usize },
}

/// Norm in which a bound measures the error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum ErrorNorm {
    L1,
    Lp(f64),
    L2,
    FNorm,
}

impl BoundParams {
    pub fn error_norm(&self) -> ErrorNorm {
        match self {
            BoundParams::RnspL1 { .. } => ErrorNorm::L1,
            BoundParams::RnspLp { p, .. } | BoundParams::QpChain { p, .. } => ErrorNorm::Lp(*p),
            BoundParams::Rwp { .. } | BoundParams::FSnsp { .. } => ErrorNorm::L2,
            BoundParams::FRnsp { .. } => ErrorNorm::FNorm,
        }
    }
}

fn require(cond: bool, msg: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::invalid(msg.to_string()))
    }
}

fn check_rnsp(rho: f64, tau: f64, k: usize) -> Result<()> {
    require((0.0..1.0).contains(&rho), "hypothesis ρ < 1 (and ρ ≥ 0) violated")?;
    require(tau >= 0.0 && tau.is_finite(), "τ must be finite and nonnegative")?;
    require(k >= 1, "sparsity k must be at least 1")
}

/// `k* = m / ln(e d / m)`.
pub fn k_star(m: usize, d: usize) -> f64 {
    let (m, d) = (m as f64, d as f64);
    m / (std::f64::consts::E * d / m).ln()
}

/// Right-hand side of the selected guarantee, given the best-approximation
/// error `sigma` (in the norm the guarantee is stated in) and the noise level `eta`.
pub fn error_bound(params: &BoundParams, sigma: f64, eta: f64) -> Result<f64> {
    require(sigma >= 0.0 && eta >= 0.0, "σ and η must be nonnegative")?;
    match *params {
        BoundParams::RnspL1 { rho, tau, k, q } => {
            check_rnsp(rho, tau, k)?;
            require(q >= 1.0, "q ≥ 1 required")?;
            let kf = k as f64;
            Ok(2.0 * (1.0 + rho) / (1.0 - rho) * sigma + 2.0 * tau / (1.0 - rho) * kf.powf(1.0 - 1.0 / q) * eta)
        }
        BoundParams::RnspLp { rho, tau, k, p, q } => {
            check_rnsp(rho, tau, k)?;
            require(p > 1.0 && p <= q, "hypothesis 1 < p ≤ q violated")?;
            let kf = k as f64;
            Ok(2.0 * (1.0 + rho).powi(2) / (1.0 - rho) * sigma / kf.powf(1.0 - 1.0 / p)
                + (3.0 + rho) / (1.0 - rho) * tau * kf.powf(1.0 / p - 1.0 / q) * eta)
        }
        BoundParams::Rwp { c0, c1, k } => {
            require(c0 > 0.0 && c1 > 0.0, "robust width constants must be positive")?;
            require(k >= 1, "sparsity k must be at least 1")?;
            Ok(4.0 * c0 * sigma / (k as f64).sqrt() + 2.0 / c1 * eta)
        }
        BoundParams::FRnsp { rho, tau, beta } => {
            require(beta > 0.0, "splitting constant β must be positive")?;
            require(rho >= 0.0 && rho < beta, "hypothesis ρ < β violated")?;
            require(tau >= 0.0, "τ must be nonnegative")?;
            Ok((1.0 + beta) * (1.0 + rho) / (beta * (beta - rho)) * sigma
                + 2.0 * tau * (1.0 + beta) / (beta - rho) * eta)
        }
        BoundParams::FSnsp { c, nu_a, n } => {
            require(c > 0.0, "stable F-null space constant c must be positive")?;
            require(nu_a > 0.0, "smallest nonzero singular value must be positive")?;
            Ok(2.0 / nu_a * ((n as f64).sqrt() / c + 1.0) * eta + 2.0 / c * sigma)
        }
        BoundParams::QpChain { c_const, d_const, k, p, m, d } => {
            require(c_const >= 0.0 && d_const >= 0.0, "C and D must be nonnegative")?;
            require(k >= 1 && p >= 1.0, "k ≥ 1 and p ≥ 1 required")?;
            require(m >= 1 && m < d, "quotient chain needs 1 ≤ m < d")?;
            let kf = k as f64;
            Ok(c_const * sigma / kf.powf(1.0 - 1.0 / p) + d_const * k_star(m, d).powf(1.0 / p - 0.5) * eta)
        }
    }
}
