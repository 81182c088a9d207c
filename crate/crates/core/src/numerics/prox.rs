//! Proximal and projection building blocks for the first-order decoders.

use super::decomp::svd;
use super::matrix::{norm2, DenseMatrix};
use crate::error::{Error, Result};

/// Entrywise soft threshold, the prox of `t‖·‖₁`.
pub fn prox_l1(v: &[f64], t: f64) -> Result<Vec<f64>> {
    if !(t >= 0.0) {
        return Err(Error::invalid("threshold must be nonnegative"));
    }
    Ok(v.iter().map(|&x| soft(x, t)).collect())
}

#[inline]
pub(crate) fn soft(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Euclidean projection onto `{x : ‖x − center‖₂ ≤ radius}`.
pub fn project_l2_ball(v: &[f64], center: &[f64], radius: f64) -> Result<Vec<f64>> {
    if !(radius >= 0.0) {
        return Err(Error::invalid("radius must be nonnegative"));
    }
    if v.len() != center.len() {
        return Err(Error::shape("ball center length mismatch"));
    }
    let mut out = v.to_vec();
    project_ball_in_place(&mut out, center, radius);
    Ok(out)
}

pub(crate) fn project_ball_in_place(v: &mut [f64], center: &[f64], radius: f64) {
    let diff: Vec<f64> = v.iter().zip(center).map(|(a, c)| a - c).collect();
    let d = norm2(&diff);
    if d > radius {
        let f = radius / d;
        for ((x, c), dv) in v.iter_mut().zip(center).zip(&diff) {
            *x = c + f * dv;
        }
    }
}

/// Euclidean projection of `v` onto `{x : A x = y}` for full-row-rank `A`.
pub fn project_affine(a: &DenseMatrix, y: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    let s = svd(a)?;
    if s.rank < a.rows() {
        return Err(Error::RankDeficient(format!(
            "affine projection needs full row rank, got rank {} of {}",
            s.rank,
            a.rows()
        )));
    }
    let r: Vec<f64> = a.matvec(v)?.iter().zip(y).map(|(av, yv)| av - yv).collect();
    let utr = s.u.tmatvec(&r)?;
    let scaled: Vec<f64> = utr.iter().zip(&s.singular_values).map(|(x, sv)| x / sv).collect();
    let corr = s.v.matvec(&scaled)?;
    Ok(v.iter().zip(&corr).map(|(x, c)| x - c).collect())
}
