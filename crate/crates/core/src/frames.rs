//! Frames, their diagnostics, and the geometry of the frame norm.
//!
//! A frame is a full-rank `d × n` matrix `F` (`n ≥ d`) whose columns span
//! `R^d`. Signals that are F-k-sparse are images `F x` with `‖x‖₀ ≤ k`; the
//! frame norm `‖z‖_F = min{‖x‖₁ : F x = z}` measures distances between
//! signals.

use std::path::PathBuf;
use std::sync::OnceLock;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::combinatorics::{binomial, complement, subsets};
use crate::error::{Error, Result};
use crate::numerics::{
    add, min_l1_equality, norm2, scale, solve_lp, svd, symmetric_eig, DenseMatrix, LpProblem, LpStatus, Vector,
};
use crate::par;
use crate::rng::{rng_from_seed, trial_rng};
use crate::tolerances::{ENUMERATION_CAP, PARSEVAL_TOL, SPARK_TOL_FACTOR};

/// Recipe for a frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FrameSpec {
    Identity {
        d: usize,
    },
    Gaussian {
        d: usize,
        n: usize,
        seed: u64,
        #[serde(default = "default_true")]
        unit_norm_columns: bool,
    },
    /// `[I | DCT-II]`, a union of two orthonormal bases (`n = 2d`).
    DctOvercomplete {
        d: usize,
    },
    File {
        path: PathBuf,
    },
}

fn default_true() -> bool {
    true
}

/// Result of a full-spark enumeration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum FullSpark {
    Yes,
    /// The lexicographically first d-subset of columns that is singular.
    No {
        witness: Vec<usize>,
    },
    NotChecked {
        reason: String,
    },
}

#[derive(Clone, Debug)]
pub struct Frame {
    matrix: DenseMatrix,
    spectral_norm: f64,
    lower_bound: f64,
    upper_bound: f64,
    parseval: bool,
    full_spark: OnceLock<FullSpark>,
}

impl Frame {
    pub fn new(matrix: DenseMatrix) -> Result<Self> {
        let (d, n) = matrix.shape();
        if d == 0 || n < d {
            return Err(Error::NotAFrame(format!("{d}x{n} matrix cannot span R^{d}")));
        }
        let s = svd(&matrix)?;
        if s.rank < d {
            return Err(Error::NotAFrame(format!("rank {} < {d}", s.rank)));
        }
        let upper = s.singular_values[0].powi(2);
        let lower = s.singular_values[d - 1].powi(2);
        let fft = matrix.matmul(&matrix.transpose())?;
        let parseval = (0..d).all(|i| {
            (0..d).all(|j| {
                let want = if i == j { 1.0 } else { 0.0 };
                (fft[(i, j)] - want).abs() <= PARSEVAL_TOL
            })
        });
        Ok(Frame {
            matrix,
            spectral_norm: s.singular_values[0],
            lower_bound: lower,
            upper_bound: upper,
            parseval,
            full_spark: OnceLock::new(),
        })
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    /// Ambient dimension `d`.
    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    /// Number of frame vectors `n`.
    pub fn len(&self) -> usize {
        self.matrix.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.cols() == 0
    }

    pub fn spectral_norm(&self) -> f64 {
        self.spectral_norm
    }

    /// Optimal frame bounds `(A, B)`: the extreme eigenvalues of `F Fᵀ`.
    pub fn frame_bounds(&self) -> (f64, f64) {
        (self.lower_bound, self.upper_bound)
    }

    pub fn is_parseval(&self) -> bool {
        self.parseval
    }

    /// `max ‖f_i‖₂²`.
    pub fn max_column_norm_sq(&self) -> f64 {
        (0..self.len()).map(|j| self.matrix.column(j).iter().map(|x| x * x).sum::<f64>()).fold(0.0, f64::max)
    }

    /// Full-spark status, computed on first use with the default cap.
    pub fn full_spark(&self) -> &FullSpark {
        self.full_spark.get_or_init(|| full_spark_with_cap(&self.matrix, self.spectral_norm, ENUMERATION_CAP))
    }

    pub fn synthesize(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.matrix.matvec(x)
    }

    pub fn analyze(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.matrix.tmatvec(z)
    }
}

/// Orthonormal DCT-II matrix; row `k` is the `k`-th basis vector.
pub fn dct2_matrix(d: usize) -> DenseMatrix {
    let df = d as f64;
    DenseMatrix::from_fn(d, d, |k, j| {
        let s = if k == 0 { (1.0 / df).sqrt() } else { (2.0 / df).sqrt() };
        s * (std::f64::consts::PI * (2 * j + 1) as f64 * k as f64 / (2.0 * df)).cos()
    })
}

pub fn make_frame(spec: &FrameSpec) -> Result<Frame> {
    match spec {
        FrameSpec::Identity { d } => Frame::new(DenseMatrix::identity(*d)),
        FrameSpec::Gaussian { d, n, seed, unit_norm_columns } => {
            if n < d {
                return Err(Error::invalid(format!("frame needs n ≥ d, got n={n}, d={d}")));
            }
            let mut rng = rng_from_seed(*seed);
            let mut m = DenseMatrix::from_fn(*d, *n, |_, _| rng.sample(StandardNormal));
            if *unit_norm_columns {
                let norms: Vec<f64> = (0..*n).map(|j| norm2(&m.column(j))).collect();
                m = m.scale_columns(&norms.iter().map(|x| 1.0 / x).collect::<Vec<_>>())?;
            }
            Frame::new(m)
        }
        FrameSpec::DctOvercomplete { d } => Frame::new(DenseMatrix::identity(*d).hstack(&dct2_matrix(*d).transpose())?),
        FrameSpec::File { path } => Frame::new(crate::io::read_matrix(path)?),
    }
}

/// Frame with columns `f_i · diag[i]`.
pub fn scale_columns(frame: &Frame, diag: &[f64]) -> Result<Frame> {
    if diag.iter().any(|&x| x == 0.0 || !x.is_finite()) {
        return Err(Error::invalid("column scaling entries must be finite and nonzero"));
    }
    Frame::new(frame.matrix.scale_columns(diag)?)
}

/// Full-spark check with an explicit enumeration cap.
pub fn is_full_spark(frame: &Frame, cap: u64) -> FullSpark {
    if cap == ENUMERATION_CAP {
        return frame.full_spark().clone();
    }
    full_spark_with_cap(&frame.matrix, frame.spectral_norm, cap)
}

fn full_spark_with_cap(f: &DenseMatrix, fnorm: f64, cap: u64) -> FullSpark {
    let (d, n) = f.shape();
    let count = binomial(n, d);
    if count > cap {
        return FullSpark::NotChecked { reason: format!("C({n},{d}) = {count} subsets exceed the cap of {cap}") };
    }
    let tol = SPARK_TOL_FACTOR * fnorm;
    let all = subsets(n, d);
    let bad = par::find_first_map(all.len(), |i| {
        let sub = f.select_columns(&all[i]);
        let smin = svd(&sub).map(|s| *s.singular_values.last().unwrap()).unwrap_or(0.0);
        (smin <= tol).then_some(())
    });
    match bad {
        Some((i, ())) => FullSpark::No { witness: all[i].clone() },
        None => FullSpark::Yes,
    }
}

/// Value of `‖z‖_F` with an achieving coefficient vector.
#[derive(Clone, Debug, Serialize)]
pub struct FNorm {
    pub value: f64,
    pub coefficients: Vector,
}

pub fn f_norm(frame: &Frame, z: &[f64]) -> Result<FNorm> {
    if z.len() != frame.dim() {
        return Err(Error::shape(format!("signal of length {} for frame in R^{}", z.len(), frame.dim())));
    }
    if z.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("signal"));
    }
    if z.iter().all(|&x| x == 0.0) {
        return Ok(FNorm { value: 0.0, coefficients: Vector::zeros(frame.len()) });
    }
    let (sol, x) = min_l1_equality(&frame.matrix, z)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Lp(format!("frame norm program ended {:?}", sol.status)));
    }
    Ok(FNorm { value: sol.objective, coefficients: x.into() })
}

/// Best F-k-term approximation of a signal in the frame norm.
#[derive(Clone, Debug, Serialize)]
pub struct FkApprox {
    pub support: Vec<usize>,
    /// Length-`n` coefficients, zero off the support.
    pub coefficients: Vector,
    /// `z_k = F · coefficients`.
    pub best_approx: Vector,
    /// `σ_{F,k}(z) = ‖z − z_k‖_F`.
    pub tail: f64,
}

/// Solves, for a fixed support `T`, `min ‖u‖₁ s.t. F u + F_T x_T = z`.
fn sigma_on_support(f: &DenseMatrix, z: &[f64], support: &[usize]) -> Result<(f64, Vec<f64>)> {
    let n = f.cols();
    let k = support.len();
    let ft = f.select_columns(support);
    let a = f.hstack(&f.scaled(-1.0))?.hstack(&ft)?.hstack(&ft.scaled(-1.0))?;
    let mut c = vec![1.0; 2 * n];
    c.resize(2 * n + 2 * k, 0.0);
    let sol = solve_lp(&LpProblem::nonnegative(c, a, z.to_vec()))?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Lp(format!("best-approximation program ended {:?}", sol.status)));
    }
    let xt: Vec<f64> = (0..k).map(|i| sol.x[2 * n + i] - sol.x[2 * n + k + i]).collect();
    Ok((sol.objective, xt))
}

pub fn sigma_f_k(frame: &Frame, z: &[f64], k: usize) -> Result<FkApprox> {
    sigma_f_k_with_cap(frame, z, k, ENUMERATION_CAP)
}

pub fn sigma_f_k_with_cap(frame: &Frame, z: &[f64], k: usize, cap: u64) -> Result<FkApprox> {
    let n = frame.len();
    if z.len() != frame.dim() {
        return Err(Error::shape("signal length must equal frame dimension"));
    }
    if k > n {
        return Err(Error::invalid(format!("sparsity {k} exceeds frame size {n}")));
    }
    let count = binomial(n, k);
    if count > cap {
        return Err(Error::EnumerationCap { needed: count, cap });
    }
    let all = subsets(n, k);
    let results = par::map_slice(&all, |t| sigma_on_support(&frame.matrix, z, t));
    let mut best: Option<(usize, f64, Vec<f64>)> = None;
    for (i, r) in results.into_iter().enumerate() {
        let (val, xt) = r?;
        // strict improvement keeps the lexicographically first minimizer
        let better = match &best {
            None => true,
            Some((_, bv, _)) => val < bv - 1e-12 * (1.0 + bv.abs()),
        };
        if better {
            best = Some((i, val, xt));
        }
    }
    let (i, tail, xt) = best.expect("at least one support");
    let support = all[i].clone();
    let mut coefficients = vec![0.0; n];
    for (&j, &v) in support.iter().zip(&xt) {
        coefficients[j] = v;
    }
    let best_approx = frame.synthesize(&coefficients)?;
    Ok(FkApprox { support, coefficients: coefficients.into(), best_approx: best_approx.into(), tail: tail.max(0.0) })
}

/// Outcome of a randomized search for violations of the splitting inequality
/// `‖x+y‖_F ≥ ‖x_s‖_F − ‖y_s‖_F + β(‖y−y_s‖_F − ‖x−x_s‖_F)`.
#[derive(Clone, Debug, Serialize)]
pub struct SplittabilityEstimate {
    pub s: usize,
    /// Every `β > beta_upper` is violated by `witness`. Infinite when no
    /// sampled pair constrained β from above.
    pub beta_upper: f64,
    /// Pairs with `‖y−y_s‖_F < ‖x−x_s‖_F` force `β ≥ beta_lower`.
    pub beta_lower: f64,
    pub witness: Option<(Vector, Vector)>,
    /// Pairs violating the inequality for every β (zero gap, negative slack).
    pub beta_free_violations: usize,
    pub trials: usize,
}

/// Both sides of the splitting inequality for a pair, as `(slack, gap)` with
/// `slack = ‖x+y‖_F − ‖x_s‖_F + ‖y_s‖_F` and `gap = σ(y) − σ(x)`; the
/// inequality reads `slack ≥ β · gap`.
pub fn splitting_terms(frame: &Frame, x: &[f64], y: &[f64], s: usize) -> Result<(f64, f64)> {
    let ax = sigma_f_k(frame, x, s)?;
    let ay = sigma_f_k(frame, y, s)?;
    let sum = f_norm(frame, &add(x, y))?.value;
    let xs = f_norm(frame, &ax.best_approx)?.value;
    let ys = f_norm(frame, &ay.best_approx)?.value;
    Ok((sum - xs + ys, ay.tail - ax.tail))
}

fn sparse_signal(frame: &Frame, s: usize, rng: &mut impl Rng) -> Vec<f64> {
    let n = frame.len();
    let support = rand::seq::index::sample(rng, n, s.min(n)).into_vec();
    let mut x = vec![0.0; n];
    for j in support {
        x[j] = rng.sample::<f64, _>(StandardNormal);
    }
    frame.synthesize(&x).expect("shape")
}

fn gaussian_vec(d: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn splittability_search(frame: &Frame, s: usize, trials: usize, seed: u64) -> Result<SplittabilityEstimate> {
    if trials == 0 {
        return Err(Error::invalid("trials must be at least 1"));
    }
    let d = frame.dim();
    let pairs = par::map_range(trials, |t| -> Result<(Vec<f64>, Vec<f64>, f64, f64)> {
        let mut rng = trial_rng(seed, t as u64);
        let (x, y) = match t % 4 {
            0 => (gaussian_vec(d, &mut rng), gaussian_vec(d, &mut rng)),
            1 => {
                let x = add(&sparse_signal(frame, s, &mut rng), &scale(&gaussian_vec(d, &mut rng), 0.1));
                (x, gaussian_vec(d, &mut rng))
            }
            2 => {
                let y = add(&sparse_signal(frame, s, &mut rng), &scale(&gaussian_vec(d, &mut rng), 0.1));
                (gaussian_vec(d, &mut rng), y)
            }
            _ => {
                let x = sparse_signal(frame, s, &mut rng);
                let other = sparse_signal(frame, s, &mut rng);
                let noise = scale(&gaussian_vec(d, &mut rng), 0.05);
                let y = add(&add(&scale(&x, -1.0), &other), &noise);
                (x, y)
            }
        };
        let (slack, gap) = splitting_terms(frame, &x, &y, s)?;
        Ok((x, y, slack, gap))
    });
    let mut beta_upper = f64::INFINITY;
    let mut beta_lower = f64::NEG_INFINITY;
    let mut witness = None;
    let mut free = 0;
    for r in pairs {
        let (x, y, slack, gap) = r?;
        let scale_ = 1e-9 * (1.0 + slack.abs());
        if gap > scale_ {
            let b = slack / gap;
            if b < beta_upper {
                beta_upper = b;
                witness = Some((Vector::from(x), Vector::from(y)));
            }
        } else if gap < -scale_ {
            beta_lower = beta_lower.max(slack / gap);
        } else if slack < -scale_ {
            free += 1;
        }
    }
    Ok(SplittabilityEstimate { s, beta_upper, beta_lower, witness, beta_free_violations: free, trials })
}

/// Extreme eigenvalues of `F Fᵀ`, recomputed directly.
pub fn frame_operator_spectrum(frame: &Frame) -> Result<Vec<f64>> {
    let m = &frame.matrix;
    Ok(symmetric_eig(&m.matmul(&m.transpose())?)?.values)
}

/// Indices not in `support`, for callers working with complements.
pub fn off_support(frame: &Frame, support: &[usize]) -> Vec<usize> {
    complement(frame.len(), support)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::norm1;

    fn frame(rows: &[Vec<f64>]) -> Frame {
        Frame::new(DenseMatrix::from_rows(rows).unwrap()).unwrap()
    }

    #[test]
    fn identity_frame() {
        let f = make_frame(&FrameSpec::Identity { d: 3 }).unwrap();
        assert_eq!(f.frame_bounds(), (1.0, 1.0));
        assert!(f.is_parseval());
        assert_eq!(f.full_spark(), &FullSpark::Yes);
    }

    #[test]
    fn dct_frame_bounds() {
        let f = make_frame(&FrameSpec::DctOvercomplete { d: 4 }).unwrap();
        assert_eq!(f.matrix().shape(), (4, 8));
        let (a, b) = f.frame_bounds();
        assert!((a - 2.0).abs() < 1e-12 && (b - 2.0).abs() < 1e-12);
        assert!(!f.is_parseval());
        let spec = frame_operator_spectrum(&f).unwrap();
        assert!(spec.iter().all(|l| (l - 2.0).abs() < 1e-12));
    }

    #[test]
    fn gaussian_frame_full_rank_unit_columns() {
        let f = make_frame(&FrameSpec::Gaussian { d: 4, n: 8, seed: 3, unit_norm_columns: true }).unwrap();
        assert_eq!(svd(f.matrix()).unwrap().rank, 4);
        for j in 0..8 {
            assert!((norm2(&f.matrix().column(j)) - 1.0).abs() < 1e-12);
        }
        assert!(make_frame(&FrameSpec::Gaussian { d: 4, n: 3, seed: 0, unit_norm_columns: true }).is_err());
    }

    #[test]
    fn rank_deficient_is_not_a_frame() {
        let m = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(matches!(Frame::new(m), Err(Error::NotAFrame(_))));
    }

    #[test]
    fn scaling() {
        let f = make_frame(&FrameSpec::Identity { d: 2 }).unwrap();
        let g = scale_columns(&f, &[2.0, 3.0]).unwrap();
        assert_eq!(g.matrix(), &DenseMatrix::from_diag(&[2.0, 3.0]));
        assert_eq!(scale_columns(&f, &[1.0, 1.0]).unwrap().matrix(), f.matrix());
        assert!(scale_columns(&f, &[1.0, 0.0]).is_err());
    }

    #[test]
    fn spark_repeated_column() {
        let f = frame(&[vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 0.0]]);
        assert_eq!(f.full_spark(), &FullSpark::No { witness: vec![0, 2] });
        assert!(matches!(is_full_spark(&f, 1), FullSpark::NotChecked { .. }));
    }

    #[test]
    fn f_norm_cases() {
        let id = make_frame(&FrameSpec::Identity { d: 3 }).unwrap();
        let z = [1.0, -2.0, 0.5];
        assert!((f_norm(&id, &z).unwrap().value - norm1(&z)).abs() < 1e-12);
        let f = frame(&[vec![1.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]);
        assert!((f_norm(&f, &[1.0, 1.0]).unwrap().value - 2.0).abs() < 1e-12);
        let zero = f_norm(&f, &[0.0, 0.0]).unwrap();
        assert_eq!(zero.value, 0.0);
        assert!(zero.coefficients.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn sigma_identity_is_l1_tail() {
        let id = make_frame(&FrameSpec::Identity { d: 3 }).unwrap();
        let a = sigma_f_k(&id, &[3.0, 2.0, 1.0], 2).unwrap();
        assert!((a.tail - 1.0).abs() < 1e-12);
        assert_eq!(a.support, vec![0, 1]);
        assert!((a.best_approx[0] - 3.0).abs() < 1e-12 && (a.best_approx[2]).abs() < 1e-12);
        let sparse = sigma_f_k(&id, &[0.0, 5.0, 0.0], 1).unwrap();
        assert!(sparse.tail.abs() < 1e-12);
        assert!(matches!(sigma_f_k_with_cap(&id, &[1.0, 1.0, 1.0], 1, 2), Err(Error::EnumerationCap { .. })));
    }

    #[test]
    fn splitting_identity_beta_one() {
        let id = make_frame(&FrameSpec::Identity { d: 4 }).unwrap();
        let est = splittability_search(&id, 1, 200, 5).unwrap();
        assert!(est.beta_upper >= 1.0 - 1e-6, "{}", est.beta_upper);
        assert_eq!(est.beta_free_violations, 0);
        let (slack, gap) = splitting_terms(&id, &[0.0; 4], &[0.0; 4], 1).unwrap();
        assert_eq!((slack, gap), (0.0, 0.0));
    }
}
