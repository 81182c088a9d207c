//! Dense two-phase primal simplex with Bland's anti-cycling rule.
//!
//! Problems have the form `min cᵀx  s.t.  A x = b,  x ≥ lower`. They are
//! small and dense here, so a full tableau is kept. After the final pivot the
//! basic solution is recomputed from the original data to shed accumulated
//! rounding.

use serde::{Deserialize, Serialize};

use super::decomp::solve;
use super::matrix::DenseMatrix;
use crate::error::{Error, Result};
use crate::tolerances::{COST_TOL, FEAS_TOL, PIVOT_TOL};

#[derive(Clone, Debug)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub a_eq: DenseMatrix,
    pub b_eq: Vec<f64>,
    /// Finite lower bound per variable.
    pub lower: Vec<f64>,
}

impl LpProblem {
    /// Problem with all lower bounds at zero.
    pub fn nonnegative(objective: Vec<f64>, a_eq: DenseMatrix, b_eq: Vec<f64>) -> Self {
        let n = objective.len();
        LpProblem { objective, a_eq, b_eq, lower: vec![0.0; n] }
    }

    fn validate(&self) -> Result<()> {
        let (m, n) = self.a_eq.shape();
        if self.objective.len() != n || self.lower.len() != n || self.b_eq.len() != m {
            return Err(Error::shape(format!(
                "LP with {m}x{n} constraints, {} costs, {} bounds, {} rhs",
                self.objective.len(),
                self.lower.len(),
                self.b_eq.len()
            )));
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !finite(&self.objective) || !finite(&self.b_eq) || !finite(&self.lower) {
            return Err(Error::NonFinite("LP data"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal point; meaningful only when `status == Optimal`.
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

struct Tableau {
    m: usize,
    /// number of columns excluding the rhs
    nv: usize,
    data: Vec<f64>,
    basis: Vec<usize>,
    /// reduced costs, last entry is minus the objective value
    z: Vec<f64>,
}

impl Tableau {
    fn width(&self) -> usize {
        self.nv + 1
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.width() + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.at(i, self.nv)
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width();
        let p = self.data[r * w + c];
        for j in 0..w {
            self.data[r * w + j] /= p;
        }
        self.data[r * w + c] = 1.0;
        let (before, rest) = self.data.split_at_mut(r * w);
        let (prow, after) = rest.split_at_mut(w);
        for row in before.chunks_exact_mut(w).chain(after.chunks_exact_mut(w)) {
            let f = row[c];
            if f != 0.0 {
                for (x, &pv) in row.iter_mut().zip(prow.iter()) {
                    *x -= f * pv;
                }
                row[c] = 0.0;
            }
        }
        let f = self.z[c];
        if f != 0.0 {
            for (x, &pv) in self.z.iter_mut().zip(prow.iter()) {
                *x -= f * pv;
            }
            self.z[c] = 0.0;
        }
        self.basis[r] = c;
    }

    fn set_costs(&mut self, cost: &[f64]) {
        let w = self.width();
        self.z = vec![0.0; w];
        self.z[..cost.len()].copy_from_slice(cost);
        for i in 0..self.m {
            let cb = cost.get(self.basis[i]).copied().unwrap_or(0.0);
            if cb != 0.0 {
                for j in 0..w {
                    self.z[j] -= cb * self.data[i * w + j];
                }
            }
        }
        for &b in &self.basis {
            self.z[b] = 0.0;
        }
    }

    fn remove_row(&mut self, r: usize) {
        let w = self.width();
        self.data.drain(r * w..(r + 1) * w);
        self.basis.remove(r);
        self.m -= 1;
    }

    /// Runs Bland-rule pivots over columns `0..allowed`.
    fn iterate(&mut self, allowed: usize, cost_tol: f64, iters: &mut usize, cap: usize) -> Result<bool> {
        loop {
            let Some(c) = (0..allowed).find(|&j| self.z[j] < -cost_tol) else {
                return Ok(true);
            };
            let mut best: Option<(usize, f64)> = None;
            for i in 0..self.m {
                let a = self.at(i, c);
                if a > PIVOT_TOL {
                    let ratio = self.rhs(i).max(0.0) / a;
                    best = match best {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            let tie = (ratio - br).abs() <= 1e-12 * (1.0 + br.abs());
                            if ratio < br && !tie || tie && self.basis[i] < self.basis[bi] {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = best else {
                return Ok(false);
            };
            self.pivot(r, c);
            *iters += 1;
            if *iters > cap {
                return Err(Error::NotConverged { what: "simplex", iterations: cap });
            }
        }
    }
}

pub fn solve_lp(p: &LpProblem) -> Result<LpSolution> {
    p.validate()?;
    let (m, n) = p.a_eq.shape();
    // shift to x' = x - lower ≥ 0 and make the rhs nonnegative
    let mut a = p.a_eq.clone();
    let shifted = p.a_eq.matvec(&p.lower)?;
    let mut b: Vec<f64> = p.b_eq.iter().zip(&shifted).map(|(bi, si)| bi - si).collect();
    for i in 0..m {
        if b[i] < 0.0 {
            b[i] = -b[i];
            for x in a.row_mut(i) {
                *x = -*x;
            }
        }
    }
    let lower_cost: f64 = p.objective.iter().zip(&p.lower).map(|(c, l)| c * l).sum();
    let nv = n + m;
    let w = nv + 1;
    let mut data = vec![0.0; m * w];
    for i in 0..m {
        data[i * w..i * w + n].copy_from_slice(a.row(i));
        data[i * w + n + i] = 1.0;
        data[i * w + nv] = b[i];
    }
    let mut t = Tableau { m, nv, data, basis: (n..nv).collect(), z: Vec::new() };
    let cap = 20_000 + 200 * (m + n);
    let mut iters = 0;

    // phase one: minimize the sum of artificials
    let mut phase1 = vec![0.0; nv];
    phase1[n..].iter_mut().for_each(|c| *c = 1.0);
    t.set_costs(&phase1);
    t.iterate(nv, COST_TOL, &mut iters, cap)?;
    let infeas = -t.z[nv];
    let b_scale = 1.0 + b.iter().map(|x| x.abs()).sum::<f64>();
    if infeas > 1e-9 * b_scale {
        return Ok(LpSolution { status: LpStatus::Infeasible, x: vec![], objective: f64::NAN, iterations: iters });
    }
    // drive zero-level artificials out of the basis, dropping redundant rows
    let mut kept_rows: Vec<usize> = (0..m).collect();
    let mut i = 0;
    while i < t.m {
        if t.basis[i] >= n {
            let cand = (0..n)
                .filter(|&j| t.at(i, j).abs() > 1e-9)
                .max_by(|&x, &y| t.at(i, x).abs().total_cmp(&t.at(i, y).abs()));
            match cand {
                Some(j) => t.pivot(i, j),
                None => {
                    t.remove_row(i);
                    kept_rows.remove(i);
                    continue;
                }
            }
        }
        i += 1;
    }

    // phase two on the original costs; artificial columns may not re-enter
    let cost_scale = p.objective.iter().fold(1.0f64, |s, c| s.max(c.abs()));
    let mut cost = p.objective.clone();
    cost.resize(nv, 0.0);
    t.set_costs(&cost);
    let bounded = t.iterate(n, COST_TOL * cost_scale, &mut iters, cap)?;
    if !bounded {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            x: vec![],
            objective: f64::NEG_INFINITY,
            iterations: iters,
        });
    }

    // recompute the basic solution from the original rows
    let mut xs = vec![0.0; n];
    for (r, &bv) in t.basis.iter().enumerate() {
        xs[bv] = t.rhs(r).max(0.0);
    }
    let basic: Vec<usize> = t.basis.clone();
    if !basic.is_empty() {
        let ab = a.select_rows(&kept_rows).select_columns(&basic);
        let bb: Vec<f64> = kept_rows.iter().map(|&r| b[r]).collect();
        if let Ok(sol) = solve(&ab, &bb) {
            if sol.iter().all(|&v| v > -FEAS_TOL) {
                let mut polished = vec![0.0; n];
                for (&bv, &v) in basic.iter().zip(&sol) {
                    polished[bv] = v.max(0.0);
                }
                if residual(&a, &b, &polished) <= residual(&a, &b, &xs) {
                    xs = polished;
                }
            }
        }
    }
    let x: Vec<f64> = xs.iter().zip(&p.lower).map(|(v, l)| v + l).collect();
    let res = residual(&p.a_eq, &p.b_eq, &x);
    if res > FEAS_TOL * (1.0 + p.b_eq.iter().fold(0.0f64, |s, v| s.max(v.abs()))) {
        return Err(Error::Lp(format!("optimal basis violates constraints by {res:e}")));
    }
    let objective = p.objective.iter().zip(&xs).map(|(c, v)| c * v).sum::<f64>() + lower_cost;
    Ok(LpSolution { status: LpStatus::Optimal, x, objective, iterations: iters })
}

/// Largest absolute row residual of `A x − b`.
pub fn residual(a: &DenseMatrix, b: &[f64], x: &[f64]) -> f64 {
    a.matvec(x).map(|ax| ax.iter().zip(b).fold(0.0f64, |m, (u, v)| m.max((u - v).abs()))).unwrap_or(f64::INFINITY)
}

/// `min ‖z‖₁ s.t. M z = y`, solved by splitting `z = z⁺ − z⁻`. Returns the
/// LP solution in split form together with the recovered `z`.
pub fn min_l1_equality(m: &DenseMatrix, y: &[f64]) -> Result<(LpSolution, Vec<f64>)> {
    let n = m.cols();
    let neg = m.scaled(-1.0);
    let a = m.hstack(&neg)?;
    let sol = solve_lp(&LpProblem::nonnegative(vec![1.0; 2 * n], a, y.to_vec()))?;
    let z = if sol.status == LpStatus::Optimal { (0..n).map(|i| sol.x[i] - sol.x[n + i]).collect() } else { vec![] };
    Ok((sol, z))
}
