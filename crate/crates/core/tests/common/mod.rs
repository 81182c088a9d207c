//! Independent brute-force oracles shared by the integration tests.
//!
//! Nothing here calls into the solvers under test; linear systems are solved
//! with a local Gaussian elimination.
#![allow(dead_code)]

use fsl_core::sensing::{sample, EnsembleSpec, Family};
use fsl_core::DenseMatrix;

pub fn gaussian(m: usize, d: usize, seed: u64) -> DenseMatrix {
    sample(&EnsembleSpec::new(Family::Gaussian, m, d, seed)).unwrap()
}

pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Solves a square system by elimination with partial pivoting; `None`
/// when a pivot falls below `1e-10` relative to the largest entry.
pub fn lin_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() < 1e-10 * scale {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for j in c..n {
                a[r][j] -= f * a[c][j];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for c in (0..n).rev() {
        let s: f64 = (c + 1..n).map(|j| a[c][j] * x[j]).sum();
        x[c] = (b[c] - s) / a[c][c];
    }
    Some(x)
}

pub fn determinant(mut a: Vec<Vec<f64>>) -> f64 {
    let n = a.len();
    let mut det = 1.0;
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        if a[p][c] == 0.0 {
            return 0.0;
        }
        if p != c {
            a.swap(c, p);
            det = -det;
        }
        det *= a[c][c];
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for j in c..n {
                a[r][j] -= f * a[c][j];
            }
        }
    }
    det
}

/// `min cᵀx s.t. Ax = b, x ≥ 0` by enumerating every basic feasible
/// solution. Assumes full row rank and a bounded optimum.
pub fn vertex_lp(c: &[f64], a: &DenseMatrix, b: &[f64]) -> Option<f64> {
    let (m, n) = a.shape();
    let mut best: Option<f64> = None;
    for basis in combinations(n, m) {
        let sys: Vec<Vec<f64>> = (0..m).map(|i| basis.iter().map(|&j| a[(i, j)]).collect()).collect();
        let Some(xb) = lin_solve(sys, b.to_vec()) else { continue };
        if xb.iter().any(|&v| v < -1e-9) {
            continue;
        }
        let obj: f64 = basis.iter().zip(&xb).map(|(&j, v)| c[j] * v).sum();
        best = Some(best.map_or(obj, |o: f64| o.min(obj)));
    }
    best
}

/// `min ‖z‖₁ s.t. Az = y` through [`vertex_lp`] on the split form.
pub fn vertex_bp(a: &DenseMatrix, y: &[f64]) -> Option<f64> {
    let split = a.hstack(&a.scaled(-1.0)).unwrap();
    vertex_lp(&vec![1.0; 2 * a.cols()], &split, y)
}

/// `min_c ‖b + M c‖₁` for `M` with full column rank `q`: some minimizer
/// zeroes `q` residuals, so enumerate those row subsets.
pub fn l1_regression(m: &DenseMatrix, b: &[f64]) -> f64 {
    let (p, q) = m.shape();
    if q == 0 {
        return b.iter().map(|v| v.abs()).sum();
    }
    let mut best = f64::INFINITY;
    for rows in combinations(p, q) {
        let sys = rows.iter().map(|&i| m.row(i).to_vec()).collect();
        let rhs = rows.iter().map(|&i| -b[i]).collect();
        if let Some(c) = lin_solve(sys, rhs) {
            let v: f64 = (0..p).map(|i| (b[i] + m.row(i).iter().zip(&c).map(|(x, y)| x * y).sum::<f64>()).abs()).sum();
            best = best.min(v);
        }
    }
    best
}

/// Whether basis pursuit recovers every k-sparse vector with the given
/// supports, all sign patterns and three magnitude draws, up to relative
/// ℓ₂ error `tol`.
pub fn exhaustive_recovery(
    a: &DenseMatrix,
    k: usize,
    tol: f64,
    seed: u64,
    decode: impl Fn(&DenseMatrix, &[f64]) -> Vec<f64>,
) -> bool {
    use rand::{Rng, SeedableRng};
    let d = a.cols();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    for support in combinations(d, k) {
        for signs in 0..(1u32 << k) {
            for _ in 0..3 {
                let mut z = vec![0.0; d];
                for (b, &j) in support.iter().enumerate() {
                    let s = if signs >> b & 1 == 1 { -1.0 } else { 1.0 };
                    z[j] = s * rng.random_range(0.5..2.0);
                }
                let y = a.matvec(&z).unwrap();
                let zh = decode(a, &y);
                let err: f64 = zh.iter().zip(&z).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
                let nz: f64 = z.iter().map(|v| v * v).sum::<f64>().sqrt();
                if err > tol * nz {
                    return false;
                }
            }
        }
    }
    true
}

/// Sylvester Hadamard matrix of order `2^p`.
pub fn hadamard(p: u32) -> Vec<Vec<f64>> {
    let mut h = vec![vec![1.0]];
    for _ in 0..p {
        let n = h.len();
        let mut g = vec![vec![0.0; 2 * n]; 2 * n];
        for i in 0..n {
            for j in 0..n {
                g[i][j] = h[i][j];
                g[i][j + n] = h[i][j];
                g[i + n][j] = h[i][j];
                g[i + n][j + n] = -h[i][j];
            }
        }
        h = g;
    }
    h
}

/// Standard normal upper tail `P(G > x)`.
pub fn normal_tail(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}
