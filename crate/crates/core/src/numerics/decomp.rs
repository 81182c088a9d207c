//! Jacobi-based SVD and symmetric eigendecomposition, plus the small dense
//! solvers built on them.

use serde::Serialize;

use super::matrix::{dot, norm2, DenseMatrix};
use crate::error::{Error, Result};
use crate::tolerances::{RANK_TOL_FACTOR, SYMMETRY_TOL};

const MAX_SWEEPS: usize = 100;
const JACOBI_EPS: f64 = 1e-15;

/// Thin singular value decomposition `M = U · diag(s) · Vᵀ`.
#[derive(Clone, Debug, Serialize)]
pub struct SvdResult {
    /// Nonincreasing, nonnegative; length `min(rows, cols)`.
    pub singular_values: Vec<f64>,
    /// `rows × min(rows, cols)`, orthonormal columns.
    pub u: DenseMatrix,
    /// `cols × min(rows, cols)`, orthonormal columns.
    pub v: DenseMatrix,
    /// Number of singular values above [`rank_tol`](Self::rank_tol).
    pub rank: usize,
    pub rank_tol: f64,
}

impl SvdResult {
    pub fn spectral_norm(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }
}

/// Output of the one-sided Jacobi iteration: `M · V = W` with mutually
/// orthogonal columns of `W`, sorted by decreasing norm.
struct OneSided {
    sigma: Vec<f64>,
    /// columns of W, in sorted order
    w: Vec<Vec<f64>>,
    /// full `cols × cols` orthogonal V, stored by columns in sorted order
    v: Vec<Vec<f64>>,
}

fn rotate(a: &mut [f64], b: &mut [f64], c: f64, s: f64) {
    for (x, y) in a.iter_mut().zip(b.iter_mut()) {
        let (xv, yv) = (*x, *y);
        *x = c * xv - s * yv;
        *y = s * xv + c * yv;
    }
}

fn pair_mut<T>(v: &mut [T], i: usize, j: usize) -> (&mut T, &mut T) {
    debug_assert!(i < j);
    let (lo, hi) = v.split_at_mut(j);
    (&mut lo[i], &mut hi[0])
}

fn one_sided_jacobi(m: &DenseMatrix) -> Result<OneSided> {
    let n = m.cols();
    let mut w: Vec<Vec<f64>> = (0..n).map(|j| m.column(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();
    let mut norms: Vec<f64> = w.iter().map(|c| dot(c, c)).collect();
    let mut converged = n < 2;
    // columns below this squared norm are numerically zero
    let floor = {
        let max_sq = norms.iter().fold(0.0f64, |a, &b| a.max(b));
        (JACOBI_EPS * JACOBI_EPS) * max_sq * (m.rows().max(n) as f64)
    };
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = norms[p];
                let beta = norms[q];
                if alpha <= floor || beta <= floor {
                    continue;
                }
                let gamma = dot(&w[p], &w[q]);
                if gamma.abs() <= JACOBI_EPS * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (wp, wq) = pair_mut(&mut w, p, q);
                rotate(wp, wq, c, s);
                let (vp, vq) = pair_mut(&mut v, p, q);
                rotate(vp, vq, c, s);
                norms[p] = dot(&w[p], &w[p]);
                norms[q] = dot(&w[q], &w[q]);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NotConverged { what: "one-sided Jacobi SVD", iterations: MAX_SWEEPS });
    }
    let sigma: Vec<f64> = w.iter().map(|c| norm2(c)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sigma[j].total_cmp(&sigma[i]).then(i.cmp(&j)));
    Ok(OneSided {
        sigma: order.iter().map(|&i| sigma[i]).collect(),
        w: order.iter().map(|&i| w[i].clone()).collect(),
        v: order.iter().map(|&i| v[i].clone()).collect(),
    })
}

/// Absolute rank cutoff for a matrix of the given shape and largest
/// singular value.
pub fn rank_tolerance(rows: usize, cols: usize, s_max: f64) -> f64 {
    RANK_TOL_FACTOR * rows.max(cols) as f64 * s_max
}

/// Extends a set of orthonormal vectors in `R^dim` with unit vectors
/// orthogonal to all of them until `target` columns exist.
fn complete_orthonormal(mut basis: Vec<Vec<f64>>, dim: usize, target: usize) -> Vec<Vec<f64>> {
    let mut e = 0;
    while basis.len() < target && e < dim {
        let mut cand = vec![0.0; dim];
        cand[e] = 1.0;
        e += 1;
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&cand, b);
                for (x, y) in cand.iter_mut().zip(b) {
                    *x -= c * y;
                }
            }
        }
        let nrm = norm2(&cand);
        if nrm > 1e-6 {
            basis.push(cand.iter().map(|x| x / nrm).collect());
        }
    }
    basis
}

fn check_finite(m: &DenseMatrix) -> Result<()> {
    if m.data().iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite("matrix"))
    }
}

pub fn svd(m: &DenseMatrix) -> Result<SvdResult> {
    check_finite(m)?;
    let (rows, cols) = m.shape();
    let r = rows.min(cols);
    let os = one_sided_jacobi(m)?;
    let s_max = os.sigma.first().copied().unwrap_or(0.0);
    let tol = rank_tolerance(rows, cols, s_max);
    let mut ucols: Vec<Vec<f64>> = Vec::with_capacity(r);
    let negligible = 1e-13 * s_max * (rows.max(cols) as f64);
    for j in 0..r {
        if os.sigma[j] > negligible && os.sigma[j] > 1e-280 {
            ucols.push(os.w[j].iter().map(|x| x / os.sigma[j]).collect());
        } else {
            break;
        }
    }
    let ucols = complete_orthonormal(ucols, rows, r);
    let u = DenseMatrix::from_fn(rows, r, |i, j| ucols[j][i]);
    let v = DenseMatrix::from_fn(cols, r, |i, j| os.v[j][i]);
    let singular_values: Vec<f64> = os.sigma[..r].to_vec();
    let rank = singular_values.iter().filter(|&&s| s > tol).count();
    Ok(SvdResult { singular_values, u, v, rank, rank_tol: tol })
}

/// Orthonormal basis of the null space (as columns); `cols × (cols − rank)`.
pub fn kernel_basis(m: &DenseMatrix) -> Result<DenseMatrix> {
    check_finite(m)?;
    let (rows, cols) = m.shape();
    let os = one_sided_jacobi(m)?;
    let s_max = os.sigma.first().copied().unwrap_or(0.0);
    let tol = rank_tolerance(rows, cols, s_max);
    let rank = os.sigma.iter().filter(|&&s| s > tol).count();
    let kcols = &os.v[rank..];
    Ok(DenseMatrix::from_fn(cols, kcols.len(), |i, j| kcols[j][i]))
}

/// Orthonormal basis of the column space (as columns).
pub fn range_basis(m: &DenseMatrix) -> Result<DenseMatrix> {
    let s = svd(m)?;
    let idx: Vec<usize> = (0..s.rank).collect();
    Ok(s.u.select_columns(&idx))
}

pub fn spectral_norm(m: &DenseMatrix) -> Result<f64> {
    Ok(svd(m)?.spectral_norm())
}

pub fn smallest_nonzero_singular_value(m: &DenseMatrix) -> Result<f64> {
    let s = svd(m)?;
    if s.rank == 0 {
        return Err(Error::invalid("matrix has no nonzero singular value"));
    }
    Ok(s.singular_values[s.rank - 1])
}

/// Eigenpairs of a symmetric matrix, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    /// Column `j` is the unit eigenvector for `values[j]`.
    pub vectors: DenseMatrix,
}

pub fn symmetric_eig(m: &DenseMatrix) -> Result<SymmetricEigen> {
    check_finite(m)?;
    if m.rows() != m.cols() {
        return Err(Error::shape("eigendecomposition needs a square matrix"));
    }
    if !m.is_symmetric(SYMMETRY_TOL) {
        return Err(Error::invalid("matrix is not symmetric"));
    }
    let n = m.rows();
    let mut a = m.clone();
    // symmetrize exactly
    for i in 0..n {
        for j in 0..i {
            let avg = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = avg;
            a[(j, i)] = avg;
        }
    }
    let mut v = DenseMatrix::identity(n);
    let total = a.frobenius_norm();
    let mut converged = n < 2 || total == 0.0;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-16 * total {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        return Err(Error::NotConverged { what: "Jacobi eigensolver", iterations: MAX_SWEEPS });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = v.select_columns(&order);
    Ok(SymmetricEigen { values, vectors })
}

/// Extremal values of `xᵀAx / xᵀBx` over `range(B) \ {0}` for symmetric PSD
/// `A`, `B`, computed by whitening with the reduced eigendecomposition of `B`.
pub fn generalized_eig_psd(a: &DenseMatrix, b: &DenseMatrix) -> Result<(f64, f64)> {
    if a.shape() != b.shape() {
        return Err(Error::shape("generalized eigenproblem needs equal shapes"));
    }
    let eb = symmetric_eig(b)?;
    let n = b.rows();
    let lmax = eb.values.last().copied().unwrap_or(0.0);
    if lmax <= 0.0 {
        return Err(Error::invalid("B is zero"));
    }
    let tol = rank_tolerance(n, n, lmax);
    let keep: Vec<usize> = (0..n).filter(|&j| eb.values[j] > tol).collect();
    let w = DenseMatrix::from_fn(n, keep.len(), |i, j| eb.vectors[(i, keep[j])] / eb.values[keep[j]].sqrt());
    let c = w.transpose().matmul(&a.matmul(&w)?)?;
    // whitening can leave rounding asymmetry
    let c = DenseMatrix::from_fn(c.rows(), c.cols(), |i, j| 0.5 * (c[(i, j)] + c[(j, i)]));
    let ec = symmetric_eig(&c)?;
    Ok((ec.values[0], *ec.values.last().unwrap()))
}

/// Solves `M x = b` by Gaussian elimination with partial pivoting.
pub fn solve(m: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = m.rows();
    if m.cols() != n || b.len() != n {
        return Err(Error::shape("solve needs a square system"));
    }
    let mut a = m.clone();
    let mut x = b.to_vec();
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[(i, col)].abs().total_cmp(&a[(j, col)].abs())).unwrap();
        if a[(piv, col)].abs() <= 1e-14 * scale {
            return Err(Error::RankDeficient("singular system".into()));
        }
        if piv != col {
            for k in 0..n {
                let t = a[(col, k)];
                a[(col, k)] = a[(piv, k)];
                a[(piv, k)] = t;
            }
            x.swap(col, piv);
        }
        for r in col + 1..n {
            let f = a[(r, col)] / a[(col, col)];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[(r, k)] -= f * a[(col, k)];
            }
            x[r] -= f * x[col];
        }
    }
    for col in (0..n).rev() {
        let s: f64 = (col + 1..n).map(|k| a[(col, k)] * x[k]).sum();
        x[col] = (x[col] - s) / a[(col, col)];
    }
    Ok(x)
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
#[derive(Clone, Debug)]
pub struct Cholesky {
    l: DenseMatrix,
}

impl Cholesky {
    pub fn new(m: &DenseMatrix) -> Result<Self> {
        let n = m.rows();
        if m.cols() != n {
            return Err(Error::shape("Cholesky needs a square matrix"));
        }
        let mut l = DenseMatrix::zeros(n, n);
        for j in 0..n {
            let mut d = m[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if d <= 0.0 {
                return Err(Error::RankDeficient("matrix is not positive definite".into()));
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in j + 1..n {
                let mut s = m[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / d;
            }
        }
        Ok(Cholesky { l })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.l.rows();
        let mut y = b.to_vec();
        for i in 0..n {
            let row = self.l.row(i);
            let s: f64 = (0..i).map(|k| row[k] * y[k]).sum();
            y[i] = (y[i] - s) / row[i];
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|k| self.l[(k, i)] * y[k]).sum();
            y[i] = (y[i] - s) / self.l[(i, i)];
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn gaussian(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut rng = rng_from_seed(seed);
        DenseMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
    }

    fn assert_orthonormal_columns(m: &DenseMatrix, tol: f64) {
        let g = m.gram();
        for i in 0..g.rows() {
            for j in 0..g.cols() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g[(i, j)] - want).abs() <= tol, "gram[{i},{j}] = {}", g[(i, j)]);
            }
        }
    }

    fn reconstruct(s: &SvdResult) -> DenseMatrix {
        let us = s.u.scale_columns(&s.singular_values).unwrap();
        us.matmul(&s.v.transpose()).unwrap()
    }

    #[test]
    fn svd_trivial_cases() {
        let s = svd(&DenseMatrix::identity(3)).unwrap();
        assert_eq!(s.singular_values, vec![1.0, 1.0, 1.0]);
        let s = svd(&DenseMatrix::zeros(2, 2)).unwrap();
        assert_eq!(s.singular_values, vec![0.0, 0.0]);
        assert_eq!(s.rank, 0);
        assert_orthonormal_columns(&s.u, 1e-12);
        let s = svd(&DenseMatrix::from_diag(&[3.0, 4.0])).unwrap();
        assert_eq!(s.singular_values, vec![4.0, 3.0]);
    }

    #[test]
    fn svd_random_reconstruction() {
        for (seed, r, c) in [(1, 5, 3), (2, 3, 7), (3, 12, 12), (4, 1, 4)] {
            let m = gaussian(r, c, seed);
            let s = svd(&m).unwrap();
            let err = spectral_norm(&reconstruct(&s).sub(&m).unwrap()).unwrap();
            assert!(err <= 1e-10 * s.spectral_norm(), "err {err}");
            assert_orthonormal_columns(&s.u, 1e-10);
            assert_orthonormal_columns(&s.v, 1e-10);
            assert!(s.singular_values.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn kernel_cases() {
        let k = kernel_basis(&DenseMatrix::from_rows(&[vec![1.0, 1.0]]).unwrap()).unwrap();
        assert_eq!(k.cols(), 1);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((k[(0, 0)].abs() - h).abs() < 1e-12);
        assert!((k[(0, 0)] + k[(1, 0)]).abs() < 1e-12);
        assert_eq!(kernel_basis(&DenseMatrix::identity(4)).unwrap().cols(), 0);
        let m = gaussian(4, 8, 11);
        let k = kernel_basis(&m).unwrap();
        assert_eq!(k.cols(), 4);
        assert_orthonormal_columns(&k, 1e-10);
        let res = spectral_norm(&m.matmul(&k).unwrap()).unwrap();
        assert!(res <= 1e-8 * spectral_norm(&m).unwrap());
    }

    #[test]
    fn smallest_nonzero() {
        let v = smallest_nonzero_singular_value(&DenseMatrix::from_diag(&[3.0, 4.0])).unwrap();
        assert!((v - 3.0).abs() < 1e-14);
        let v = smallest_nonzero_singular_value(&DenseMatrix::from_rows(&[vec![1.0, 1.0]]).unwrap()).unwrap();
        assert!((v - 2f64.sqrt()).abs() < 1e-14);
        let v = smallest_nonzero_singular_value(&DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap())
            .unwrap();
        assert!((v - 2f64.sqrt()).abs() < 1e-14);
        assert!(smallest_nonzero_singular_value(&DenseMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn eig_cases() {
        let e = symmetric_eig(&DenseMatrix::from_diag(&[3.0, -1.0, 2.0])).unwrap();
        assert_eq!(e.values, vec![-1.0, 2.0, 3.0]);
        let e = symmetric_eig(&DenseMatrix::identity(3)).unwrap();
        assert_eq!(e.values, vec![1.0; 3]);
        assert!(symmetric_eig(&DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap()).is_err());
        // PSD cross-check against SVD
        let g = gaussian(7, 5, 9).gram();
        let e = symmetric_eig(&g).unwrap();
        let s = svd(&g).unwrap();
        let mut sv = s.singular_values.clone();
        sv.reverse();
        for (a, b) in e.values.iter().zip(&sv) {
            assert!((a - b).abs() <= 1e-10 * s.spectral_norm());
        }
        let av = g.matmul(&e.vectors).unwrap();
        for j in 0..5 {
            for i in 0..5 {
                assert!((av[(i, j)] - e.values[j] * e.vectors[(i, j)]).abs() <= 1e-9 * s.spectral_norm());
            }
        }
    }

    #[test]
    fn generalized_cases() {
        let i2 = DenseMatrix::identity(2);
        assert_eq!(generalized_eig_psd(&i2, &i2).unwrap(), (1.0, 1.0));
        let (lo, hi) =
            generalized_eig_psd(&DenseMatrix::from_diag(&[2.0, 8.0]), &DenseMatrix::from_diag(&[1.0, 4.0])).unwrap();
        assert!((lo - 2.0).abs() < 1e-14 && (hi - 2.0).abs() < 1e-14);
        let (lo, hi) = generalized_eig_psd(&DenseMatrix::from_diag(&[1.0, 3.0]), &i2).unwrap();
        assert!((lo - 1.0).abs() < 1e-14 && (hi - 3.0).abs() < 1e-14);
        assert!(generalized_eig_psd(&i2, &DenseMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn linear_solvers() {
        let m = gaussian(6, 6, 5);
        let x: Vec<f64> = (0..6).map(|i| i as f64 - 2.5).collect();
        let b = m.matvec(&x).unwrap();
        let sol = solve(&m, &b).unwrap();
        assert!(sol.iter().zip(&x).all(|(a, b)| (a - b).abs() < 1e-10));
        let spd = gaussian(9, 6, 6).gram();
        let b = spd.matvec(&x).unwrap();
        let sol = Cholesky::new(&spd).unwrap().solve(&b);
        assert!(sol.iter().zip(&x).all(|(a, b)| (a - b).abs() < 1e-9));
        assert!(Cholesky::new(&DenseMatrix::zeros(2, 2)).is_err());
    }
}
