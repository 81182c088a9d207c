//! Checkers for sparse-recovery properties of measurement matrices.
//!
//! Exact checks enumerate supports and refuse to run past
//! [`ENUMERATION_CAP`]; sampled checks return estimates that are one-sided
//! (lower bounds on the true constant, or falsification only).

use std::collections::BTreeMap;

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::combinatorics::{binomial, complement, sign_patterns, subsets};
use crate::error::{Error, Result};
use crate::frames::{splittability_search, Frame, FullSpark};
use crate::numerics::{
    generalized_eig_psd, kernel_basis, min_l1_equality, norm1, norm2, norm_p, range_basis, solve_lp, svd,
    symmetric_eig, DenseMatrix, LpProblem, LpStatus, Vector,
};
use crate::par;
use crate::rng::{derive_seed, rng_from_seed, trial_rng, TrialRng};
use crate::tolerances::{rip_rnsp_threshold, ENUMERATION_CAP, NSP_MARGIN, WITNESS_TOL};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Verdict {
    CertifiedHolds,
    CertifiedFails,
    Estimate { value: f64, trials: usize },
    NotChecked { reason: String },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vector: Option<Vector>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub support: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub signs: Option<Vec<i8>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub property: String,
    pub params: BTreeMap<String, f64>,
    pub verdict: Verdict,
    /// Exact or estimated constant associated with the property.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
}

impl PropertyReport {
    fn new(property: &str, params: &[(&str, f64)], verdict: Verdict) -> Self {
        PropertyReport {
            property: property.to_string(),
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            verdict,
            value: None,
            witness: None,
        }
    }

    fn with_value(mut self, v: f64) -> Self {
        self.value = Some(v);
        self
    }

    fn with_witness(mut self, w: Witness) -> Self {
        self.witness = Some(w);
        self
    }

    pub fn not_checked(property: &str, params: &[(&str, f64)], reason: impl Into<String>) -> Self {
        Self::new(property, params, Verdict::NotChecked { reason: reason.into() })
    }

    pub fn holds(&self) -> bool {
        self.verdict == Verdict::CertifiedHolds
    }

    pub fn fails(&self) -> bool {
        self.verdict == Verdict::CertifiedFails
    }
}

fn normalized_columns(a: &DenseMatrix) -> Result<DenseMatrix> {
    let norms: Vec<f64> = (0..a.cols()).map(|j| norm2(&a.column(j))).collect();
    if let Some(j) = norms.iter().position(|&n| n == 0.0) {
        return Err(Error::invalid(format!("column {j} is zero")));
    }
    a.scale_columns(&norms.iter().map(|n| 1.0 / n).collect::<Vec<_>>())
}

/// Largest absolute inner product between distinct normalized columns.
pub fn coherence(a: &DenseMatrix) -> Result<f64> {
    if a.cols() < 2 {
        return Ok(0.0);
    }
    let g = normalized_columns(a)?.gram();
    let n = g.rows();
    let mut mu: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            mu = mu.max(g[(i, j)].abs());
        }
    }
    Ok(mu.min(1.0))
}

/// Coherence, optionally tested against the sufficient condition `μ < 1/(2k−1)`.
pub fn coherence_report(a: &DenseMatrix, k: Option<usize>) -> Result<PropertyReport> {
    let mu = coherence(a)?;
    Ok(match k {
        None => PropertyReport::new("coherence", &[], Verdict::CertifiedHolds).with_value(mu),
        Some(k) => {
            if k == 0 {
                return Err(Error::invalid("k must be at least 1"));
            }
            let ok = mu < 1.0 / (2 * k - 1) as f64;
            let verdict = if ok { Verdict::CertifiedHolds } else { Verdict::CertifiedFails };
            PropertyReport::new("coherence", &[("k", k as f64)], verdict).with_value(mu)
        }
    })
}

/// An exact restricted isometry constant with the support attaining it.
#[derive(Clone, Debug, Serialize)]
pub struct RipValue {
    pub delta: f64,
    pub support: Vec<usize>,
    /// Extreme eigenvalues over all supports.
    pub lower: f64,
    pub upper: f64,
}

fn check_cap(count: u64) -> Result<()> {
    if count > ENUMERATION_CAP {
        Err(Error::EnumerationCap { needed: count, cap: ENUMERATION_CAP })
    } else {
        Ok(())
    }
}

fn reduce_rip(all: &[Vec<usize>], extremes: Vec<Result<(f64, f64)>>) -> Result<RipValue> {
    let mut best: Option<RipValue> = None;
    let (mut lower, mut upper) = (f64::INFINITY, f64::NEG_INFINITY);
    for (t, r) in all.iter().zip(extremes) {
        let (lo, hi) = r?;
        lower = lower.min(lo);
        upper = upper.max(hi);
        let dev = (hi - 1.0).max(1.0 - lo);
        if best.as_ref().is_none_or(|b| dev > b.delta) {
            best = Some(RipValue { delta: dev, support: t.clone(), lower: 0.0, upper: 0.0 });
        }
    }
    let mut b = best.ok_or_else(|| Error::invalid("no supports to enumerate"))?;
    b.lower = lower;
    b.upper = upper;
    Ok(b)
}

/// `δ_k = max_{|T|=k} ‖A_Tᵀ A_T − I‖₂`.
pub fn rip_constant_exact(a: &DenseMatrix, k: usize) -> Result<RipValue> {
    let d = a.cols();
    if k == 0 || k > d {
        return Err(Error::invalid(format!("order {k} outside 1..={d}")));
    }
    check_cap(binomial(d, k))?;
    let all = subsets(d, k);
    let extremes = par::map_slice(&all, |t| {
        let e = symmetric_eig(&a.select_columns(t).gram())?;
        Ok((e.values[0], *e.values.last().unwrap()))
    });
    reduce_rip(&all, extremes)
}

/// `δ` of `A` restricted to `Σ_{F,k}`: generalized eigenvalues of
/// `(F_Tᵀ AᵀA F_T, F_Tᵀ F_T)` over every support `T`.
pub fn f_rip_constant_exact(a: &DenseMatrix, f: &DenseMatrix, k: usize) -> Result<RipValue> {
    if a.cols() != f.rows() {
        return Err(Error::shape("A and F dimensions disagree"));
    }
    let n = f.cols();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("order {k} outside 1..={n}")));
    }
    check_cap(binomial(n, k))?;
    let af = a.matmul(f)?;
    let all = subsets(n, k);
    let extremes =
        par::map_slice(&all, |t| generalized_eig_psd(&af.select_columns(t).gram(), &f.select_columns(t).gram()));
    reduce_rip(&all, extremes)
}

fn cap_reason(e: &Error) -> Option<String> {
    match e {
        Error::EnumerationCap { .. } => Some(e.to_string()),
        _ => None,
    }
}

fn rip_like_report(property: &str, k: usize, delta: Option<f64>, value: Result<RipValue>) -> Result<PropertyReport> {
    let params = [("k", k as f64), ("delta", delta.unwrap_or(f64::NAN))];
    let params = if delta.is_some() { &params[..] } else { &params[..1] };
    match value {
        Ok(r) => {
            let verdict = match delta {
                Some(t) if r.delta > t => Verdict::CertifiedFails,
                _ => Verdict::CertifiedHolds,
            };
            Ok(PropertyReport::new(property, params, verdict)
                .with_value(r.delta)
                .with_witness(Witness { support: Some(r.support), ..Default::default() }))
        }
        Err(e) => cap_reason(&e).map(|r| PropertyReport::not_checked(property, params, r)).ok_or(e),
    }
}

/// RIP report; with `delta` the verdict tests `δ_k ≤ delta`.
pub fn rip_report(a: &DenseMatrix, k: usize, delta: Option<f64>) -> Result<PropertyReport> {
    rip_like_report("rip", k, delta, rip_constant_exact(a, k))
}

/// F-RIP report; with `delta` the verdict tests `δ_k ≤ delta`.
pub fn f_rip_report(a: &DenseMatrix, f: &DenseMatrix, k: usize, delta: Option<f64>) -> Result<PropertyReport> {
    rip_like_report("f_rip", k, delta, f_rip_constant_exact(a, f, k))
}

/// Solves `min ‖z_{Tᶜ}‖₁ s.t. R z = 0, sᵀ z_T = 1` where the rows of `R`
/// span the row space of `A`. Returns `None` when infeasible.
fn nsp_program(r: &DenseMatrix, d: usize, t: &[usize], s: &[i8]) -> Result<Option<(f64, Vec<f64>)>> {
    let rows = r.rows() + 1;
    let mut a = DenseMatrix::zeros(rows, 2 * d);
    for i in 0..r.rows() {
        let row = a.row_mut(i);
        for j in 0..d {
            row[j] = r[(i, j)];
            row[d + j] = -r[(i, j)];
        }
    }
    let last = a.row_mut(rows - 1);
    for (&j, &sj) in t.iter().zip(s) {
        last[j] = f64::from(sj);
        last[d + j] = -f64::from(sj);
    }
    let mut c = vec![1.0; 2 * d];
    for &j in t {
        c[j] = 0.0;
        c[d + j] = 0.0;
    }
    let mut b = vec![0.0; rows];
    b[rows - 1] = 1.0;
    let sol = solve_lp(&LpProblem::nonnegative(c, a, b))?;
    match sol.status {
        LpStatus::Optimal => Ok(Some((sol.objective, (0..d).map(|j| sol.x[j] - sol.x[d + j]).collect()))),
        LpStatus::Infeasible => Ok(None),
        LpStatus::Unbounded => Err(Error::Lp("null space program unbounded".into())),
    }
}

/// Exact null space property check of order `k`.
///
/// For every support `T` and sign pattern `s` with `s₁ = +1` (the pattern
/// `−s` gives the negated program) the minimum of `‖z_{Tᶜ}‖₁` over kernel
/// vectors with `sᵀ z_T = 1` is computed. A minimum `≤ 1 + NSP_MARGIN`
/// is a violation; otherwise the reported value is the exact constant
/// `max ‖z_T‖₁ / ‖z_{Tᶜ}‖₁ < 1`.
pub fn nsp_check_exact(a: &DenseMatrix, k: usize) -> Result<PropertyReport> {
    let d = a.cols();
    let params = [("k", k as f64)];
    if k == 0 || k > d {
        return Err(Error::invalid(format!("order {k} outside 1..={d}")));
    }
    let count = binomial(d, k).saturating_mul(1u64 << k.min(63));
    if count > ENUMERATION_CAP {
        return Ok(PropertyReport::not_checked(
            "nsp",
            &params,
            format!("{count} programs exceed the cap of {ENUMERATION_CAP}"),
        ));
    }
    let s = svd(a)?;
    if s.rank == d {
        return Ok(PropertyReport::new("nsp", &params, Verdict::CertifiedHolds).with_value(0.0));
    }
    let r = range_basis(&a.transpose())?.transpose();
    let supports = subsets(d, k);
    let signs = sign_patterns(k, true);
    let jobs: Vec<(usize, usize)> = (0..supports.len()).flat_map(|i| (0..signs.len()).map(move |j| (i, j))).collect();
    let results = par::map_slice(&jobs, |&(i, j)| nsp_program(&r, d, &supports[i], &signs[j]));
    let mut ratio: f64 = 0.0;
    for (&(i, j), res) in jobs.iter().zip(results) {
        let Some((min, z)) = res? else { continue };
        if 1.0 - min > -NSP_MARGIN {
            let t = &supports[i];
            return Ok(PropertyReport::new("nsp", &params, Verdict::CertifiedFails)
                .with_value(if min > 0.0 { 1.0 / min } else { f64::INFINITY })
                .with_witness(Witness {
                    vector: Some(z.into()),
                    support: Some(t.clone()),
                    signs: Some(signs[j].clone()),
                }));
        }
        ratio = ratio.max(1.0 / min);
    }
    Ok(PropertyReport::new("nsp", &params, Verdict::CertifiedHolds).with_value(ratio))
}

/// `‖z_T‖₁ − ‖z_{Tᶜ}‖₁` and `‖A z‖₂` of a null-space witness, for re-evaluation.
pub fn nsp_witness_gap(a: &DenseMatrix, z: &[f64], support: &[usize]) -> Result<(f64, f64)> {
    let on: f64 = support.iter().map(|&j| z[j].abs()).sum();
    let off = norm1(z) - on;
    Ok((on - off, norm2(&a.matvec(z)?)))
}

/// `(ρ, τ)` of the ℓ₂ robust null space property implied by RIP of order 2k.
pub fn rnsp_from_rip(delta: f64) -> Result<(f64, f64)> {
    let limit = rip_rnsp_threshold();
    if !(0.0..limit).contains(&delta) {
        return Err(Error::invalid(format!("δ = {delta} outside [0, 4/√41)")));
    }
    let den = (1.0 - delta * delta).sqrt() - delta / 4.0;
    Ok((delta / den, (1.0 + delta).sqrt() / den))
}

/// ℓ₂ robust null space property of order `k` certified through the exact
/// `δ_{2k}`. The report value is `ρ`; `δ`, `ρ` and `τ` are listed in the
/// parameters. Outside the transfer regime nothing is certified.
pub fn rnsp_from_rip_report(a: &DenseMatrix, k: usize) -> Result<PropertyReport> {
    let delta = match rip_constant_exact(a, 2 * k) {
        Ok(r) => r.delta,
        Err(e) => {
            return cap_reason(&e).map(|r| PropertyReport::not_checked("rnsp_from_rip", &[("k", k as f64)], r)).ok_or(e)
        }
    };
    match rnsp_from_rip(delta) {
        Ok((rho, tau)) => Ok(PropertyReport::new(
            "rnsp_from_rip",
            &[("k", k as f64), ("delta", delta), ("rho", rho), ("tau", tau)],
            Verdict::CertifiedHolds,
        )
        .with_value(rho)),
        Err(_) => Ok(PropertyReport::not_checked(
            "rnsp_from_rip",
            &[("k", k as f64), ("delta", delta)],
            format!("δ_2k = {delta:.6} is not below 4/√41"),
        )),
    }
}

/// A point of the cone section `S^q_{k,ρ}` and its defining support.
#[derive(Clone, Debug, Serialize)]
pub struct SparseConeSample {
    pub support: Vec<usize>,
    pub v: Vector,
}

fn gaussian_unit_q(len: usize, q: f64, rng: &mut TrialRng) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm_p(&g, q);
        if n > 0.0 {
            return g.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Draws `v` with `‖v_T‖_q ≥ ρ k^{1/q−1} ‖v_{Tᶜ}‖₁`, normalized to the ℓ_q
/// sphere. Even trials saturate the cone inequality.
pub fn sample_cone(n: usize, k: usize, rho: f64, q: f64, saturate: bool, rng: &mut TrialRng) -> SparseConeSample {
    let mut support = sample_indices(rng, n, k).into_vec();
    support.sort_unstable();
    let off = complement(n, &support);
    let head = gaussian_unit_q(k, q, rng);
    let mut v = vec![0.0; n];
    for (&j, &x) in support.iter().zip(&head) {
        v[j] = x;
    }
    if !off.is_empty() {
        let budget = (k as f64).powf(1.0 - 1.0 / q) / rho;
        let frac = if saturate { 1.0 } else { rng.random::<f64>() };
        let tail = gaussian_unit_q(off.len(), 1.0, rng);
        for (&j, &x) in off.iter().zip(&tail) {
            v[j] = x * budget * frac;
        }
    }
    let nv = norm_p(&v, q);
    SparseConeSample { support, v: v.into_iter().map(|x| x / nv).collect::<Vec<_>>().into() }
}

/// Sampled `τ̂ = 1 / min ‖F v‖₂` over cone-section points. A lower bound on
/// the smallest valid τ; infinite when a sample lies in the kernel.
pub fn rnsp_star_estimate(
    f: &DenseMatrix,
    k: usize,
    rho: f64,
    q: f64,
    trials: usize,
    seed: u64,
) -> Result<PropertyReport> {
    let n = f.cols();
    if k == 0 || k > n || trials == 0 || !(rho > 0.0 && rho < 1.0) || !(1.0..=2.0).contains(&q) {
        return Err(Error::invalid("need 1 ≤ k ≤ n, trials ≥ 1, 0 < ρ < 1 and 1 ≤ q ≤ 2"));
    }
    let vals = par::map_range(trials, |t| {
        let mut rng = trial_rng(seed, t as u64);
        let s = sample_cone(n, k, rho, q, t % 2 == 0, &mut rng);
        (norm2(&f.matvec(&s.v).expect("shape")), s)
    });
    let (i, min) =
        vals.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, (v, _))| if *v < acc.1 { (i, *v) } else { acc });
    let tau = if min > 1e-12 * f.frobenius_norm().max(1.0) { 1.0 / min } else { f64::INFINITY };
    if tau.is_infinite() {
        log::warn!("a cone sample lies in the kernel; the property likely fails");
    }
    let params = [("k", k as f64), ("rho", rho), ("q", q)];
    let s = &vals[i].1;
    Ok(PropertyReport::new("rnsp_star", &params, Verdict::Estimate { value: tau, trials })
        .with_value(tau)
        .with_witness(Witness { vector: Some(s.v.clone()), support: Some(s.support.clone()), signs: None }))
}

/// Null space property of `A F`, which for a full-spark frame is
/// equivalent to the F-null space property of `A`.
pub fn f_nsp_check(a: &DenseMatrix, frame: &Frame, k: usize) -> Result<PropertyReport> {
    let params = [("k", k as f64)];
    match frame.full_spark() {
        FullSpark::Yes => {
            let mut r = nsp_check_exact(&a.matmul(frame.matrix())?, k)?;
            r.property = "f_nsp".into();
            Ok(r)
        }
        FullSpark::No { witness } => {
            Ok(PropertyReport::not_checked("f_nsp", &params, format!("frame is not full spark (columns {witness:?})")))
        }
        FullSpark::NotChecked { reason } => {
            Ok(PropertyReport::not_checked("f_nsp", &params, format!("full spark unknown: {reason}")))
        }
    }
}

/// `k* = m / ln(e d / m)`.
pub fn k_star(m: usize, d: usize) -> f64 {
    crate::decoders::k_star(m, d)
}

/// Sampled `α̂ = max ‖y‖_A / √k*` over unit `y`.
pub fn quotient_estimate(a: &DenseMatrix, trials: usize, seed: u64) -> Result<PropertyReport> {
    let (m, d) = a.shape();
    if trials == 0 {
        return Err(Error::invalid("trials must be at least 1"));
    }
    if svd(a)?.rank < m {
        return Err(Error::RankDeficient(format!("rank below m = {m}; the quotient norm is undefined")));
    }
    let ks = k_star(m, d);
    let vals = par::map_range(trials, |t| -> Result<(f64, Vec<f64>)> {
        let mut rng = trial_rng(seed, t as u64);
        let y = gaussian_unit_q(m, 2.0, &mut rng);
        let (sol, _) = min_l1_equality(a, &y)?;
        if sol.status != LpStatus::Optimal {
            return Err(Error::Lp(format!("quotient norm program ended {:?}", sol.status)));
        }
        Ok((sol.objective / ks.sqrt(), y))
    });
    let mut best = (f64::NEG_INFINITY, Vec::new());
    for v in vals {
        let v = v?;
        if v.0 > best.0 {
            best = v;
        }
    }
    Ok(PropertyReport::new("quotient", &[], Verdict::Estimate { value: best.0, trials })
        .with_value(best.0)
        .with_witness(Witness { vector: Some(best.1.into()), ..Default::default() }))
}

/// Randomized search for `z` with `‖A z‖₂ < c₁‖z‖₂` and
/// `‖z‖₂ > c₀ ‖z‖₁ / √k`. The reported value is the largest
/// `√k ‖z‖₂ / (c₀ ‖z‖₁)` among samples meeting the first condition.
pub fn rwp_falsify(a: &DenseMatrix, k: usize, c0: f64, c1: f64, trials: usize, seed: u64) -> Result<PropertyReport> {
    let d = a.cols();
    if k == 0 || k > d || trials == 0 || !(c0 > 0.0 && c1 > 0.0) {
        return Err(Error::invalid("need 1 ≤ k ≤ d, trials ≥ 1 and positive constants"));
    }
    let kernel = kernel_basis(a)?;
    let kf = (k as f64).sqrt();
    let params = [("k", k as f64), ("c0", c0), ("c1", c1)];
    let evals = par::map_range(trials, |t| -> Result<(Option<f64>, Vec<f64>)> {
        let mut rng = trial_rng(seed, t as u64);
        let mut z = vec![0.0; d];
        match t % 3 {
            0 | 1 if kernel.cols() > 0 => {
                let c: Vec<f64> = (0..kernel.cols()).map(|_| rng.sample(StandardNormal)).collect();
                z = kernel.matvec(&c)?;
                let eps = 10f64.powf(-rng.random_range(1.0..6.0));
                let nz = norm2(&z);
                for x in z.iter_mut() {
                    *x += eps * nz * rng.sample::<f64, _>(StandardNormal);
                }
                if t % 3 == 1 {
                    // keep the largest entries to push toward sparsity
                    let keep = crate::numerics::top_k_indices(&z, (2 * k).min(d));
                    let mut sparse = vec![0.0; d];
                    for j in keep {
                        sparse[j] = z[j];
                    }
                    z = sparse;
                }
            }
            _ => {
                let s = rng.random_range(1..=(2 * k).min(d));
                for j in sample_indices(&mut rng, d, s) {
                    z[j] = rng.sample(StandardNormal);
                }
            }
        }
        let nz = norm2(&z);
        if nz == 0.0 {
            return Ok((None, z));
        }
        let small_image = norm2(&a.matvec(&z)?) < c1 * nz;
        Ok((small_image.then(|| kf * nz / (c0 * norm1(&z))), z))
    });
    let mut worst: f64 = 0.0;
    for e in evals {
        let (ratio, z) = e?;
        if let Some(r) = ratio {
            if r > 1.0 + WITNESS_TOL {
                return Ok(PropertyReport::new("rwp", &params, Verdict::CertifiedFails)
                    .with_value(r)
                    .with_witness(Witness { vector: Some(z.into()), ..Default::default() }));
            }
            worst = worst.max(r);
        }
    }
    Ok(PropertyReport::new("rwp", &params, Verdict::Estimate { value: worst, trials }).with_value(worst))
}

/// Column scaling `D` that breaks the null space property of `B D`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NspBreaking {
    pub diagonal: Vec<f64>,
    /// Kernel vector of `B D` with `‖w_T‖₁ − ‖w_{Tᶜ}‖₁ = 1`.
    pub w: Vector,
    pub support: Vec<usize>,
    /// The kernel vector of `B` the construction started from.
    pub v: Vector,
}

/// The construction for a given kernel vector `v`: `T` holds the `k`
/// smallest nonzero magnitudes of `v` (ties to the lower index, padded
/// with zero coordinates), `D_T = ‖v_T‖₁ / (‖v_{Tᶜ}‖₁ + 1)` and `D = 1`
/// elsewhere, `w = D⁻¹ v`.
pub fn nsp_breaking_from_vector(v: &[f64], k: usize) -> Result<NspBreaking> {
    let n = v.len();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("order {k} outside 1..={n}")));
    }
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let cutoff = 1e-12 * scale;
    let mut nonzero: Vec<usize> = (0..n).filter(|&i| v[i].abs() > cutoff).collect();
    if nonzero.is_empty() {
        return Err(Error::Construction("kernel vector is zero".into()));
    }
    nonzero.sort_by(|&i, &j| v[i].abs().total_cmp(&v[j].abs()).then(i.cmp(&j)));
    let mut support: Vec<usize> = nonzero.iter().copied().take(k).collect();
    for i in 0..n {
        if support.len() == k {
            break;
        }
        if !support.contains(&i) {
            support.push(i);
        }
    }
    support.sort_unstable();
    let on: f64 = support.iter().map(|&j| v[j].abs()).sum();
    let off = norm1(v) - on;
    let dt = on / (off + 1.0);
    let mut diagonal = vec![1.0; n];
    let mut w = v.to_vec();
    for &j in &support {
        diagonal[j] = dt;
        w[j] = v[j] / dt;
    }
    Ok(NspBreaking { diagonal, w: w.into(), support, v: v.to_vec().into() })
}

/// Picks `v` as the first kernel basis column of `B`, falling back to
/// random kernel combinations, and applies [`nsp_breaking_from_vector`].
pub fn nsp_breaking_diagonal(b: &DenseMatrix, k: usize) -> Result<NspBreaking> {
    let kernel = kernel_basis(b)?;
    if kernel.cols() == 0 {
        return Err(Error::Construction("trivial kernel: no scaling can break the null space property".into()));
    }
    let first = kernel.column(0);
    if let Ok(r) = nsp_breaking_from_vector(&first, k) {
        return Ok(r);
    }
    let mut rng = rng_from_seed(derive_seed(0x5eed, &[b.rows() as u64, b.cols() as u64, k as u64]));
    for _ in 0..100 {
        let c: Vec<f64> = (0..kernel.cols()).map(|_| rng.sample(StandardNormal)).collect();
        if let Ok(r) = nsp_breaking_from_vector(&kernel.matvec(&c)?, k) {
            return Ok(r);
        }
    }
    Err(Error::Construction(format!("no usable kernel vector after 100 draws ({} kernel dimensions)", kernel.cols())))
}

/// Splittability search as a report: the value is the smallest sampled
/// upper bound on β, and the witness vector is the pair `(x, y)`
/// concatenated.
pub fn splittability_report(frame: &Frame, s: usize, trials: usize, seed: u64) -> Result<PropertyReport> {
    let e = splittability_search(frame, s, trials, seed)?;
    let params =
        [("s", s as f64), ("beta_lower", e.beta_lower), ("beta_free_violations", e.beta_free_violations as f64)];
    let mut r = PropertyReport::new("split", &params, Verdict::Estimate { value: e.beta_upper, trials })
        .with_value(e.beta_upper);
    if let Some((x, y)) = e.witness {
        let mut v = x.to_vec();
        v.extend_from_slice(&y);
        r = r.with_witness(Witness { vector: Some(v.into()), ..Default::default() });
    }
    Ok(r)
}
