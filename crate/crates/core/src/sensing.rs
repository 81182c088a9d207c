//! Random measurement ensembles and Monte-Carlo estimators for small-ball
//! probabilities, empirical mean widths and moment growth.

use rand::seq::index::sample as sample_indices;
use rand::{Rng, RngCore};
use rand_distr::{Distribution, Exp1, StandardNormal, StudentT, Weibull};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::dct2_matrix;
use crate::numerics::{compensated_sum, dot, norm2, top_k_norm2, DenseMatrix};
use crate::par;
use crate::rng::{rng_from_seed, trial_rng, TrialRng};
use crate::tolerances::{HOEFFDING_DELTA, MOMENT_SLACK};

/// Distribution of a measurement matrix, before normalization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Gaussian,
    Rademacher,
    /// Rows uniform on the sphere of radius `√d` (isotropic).
    UniformSphereRows,
    Laplace,
    /// Random sign times a Weibull(1, r) magnitude, scaled to unit variance.
    Weibull {
        shape: f64,
    },
    /// Student-t scaled by `√((K−2)/K)`.
    StudentT {
        degrees: f64,
    },
    /// Rows `Ω` of the circular convolution with a generator `c`.
    PartialCirculant {
        generator: Generator,
        #[serde(default)]
        omega: Option<Vec<usize>>,
    },
    /// Rows `Ω` of the orthonormal DCT-II matrix, scaled by `√d`.
    SubsampledDct {
        #[serde(default)]
        omega: Option<Vec<usize>>,
    },
    /// All-zero matrix, a degenerate reference case.
    Zero,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    /// iid entries drawn from an entrywise family.
    Random(Box<Family>),
    Fixed(Vec<f64>),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    #[default]
    RowsByInvSqrtM,
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    #[serde(flatten)]
    pub family: Family,
    pub m: usize,
    pub d: usize,
    pub seed: u64,
    #[serde(default)]
    pub normalization: Normalization,
}

impl EnsembleSpec {
    pub fn new(family: Family, m: usize, d: usize, seed: u64) -> Self {
        EnsembleSpec { family, m, d, seed, normalization: Normalization::RowsByInvSqrtM }
    }

    pub fn unnormalized(mut self) -> Self {
        self.normalization = Normalization::None;
        self
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        EnsembleSpec { seed, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.d == 0 {
            return Err(Error::invalid(format!("ensemble dimensions must be positive, got {}x{}", self.m, self.d)));
        }
        validate_family(&self.family, self.m, self.d)
    }
}

fn validate_family(family: &Family, m: usize, d: usize) -> Result<()> {
    match family {
        Family::Weibull { shape } if !(1.0..=2.0).contains(shape) => {
            Err(Error::invalid(format!("Weibull shape must lie in [1,2], got {shape}")))
        }
        Family::StudentT { degrees } if !(*degrees >= 3.0) => {
            Err(Error::invalid(format!("Student-t degrees must be at least 3, got {degrees}")))
        }
        Family::PartialCirculant { generator, omega } => {
            match generator {
                Generator::Random(inner) => {
                    if !is_entrywise(inner) {
                        return Err(Error::invalid("circulant generator must be an entrywise family"));
                    }
                    validate_family(inner, m, d)?;
                }
                Generator::Fixed(c) => {
                    if c.len() != d || c.iter().any(|x| !x.is_finite()) {
                        return Err(Error::invalid(format!("fixed generator needs {d} finite entries")));
                    }
                }
            }
            validate_omega(omega.as_deref(), m, d)
        }
        Family::SubsampledDct { omega } => validate_omega(omega.as_deref(), m, d),
        _ => Ok(()),
    }
}

fn validate_omega(omega: Option<&[usize]>, m: usize, d: usize) -> Result<()> {
    if m > d {
        return Err(Error::invalid(format!("cannot subsample {m} of {d} rows")));
    }
    if let Some(o) = omega {
        let mut sorted = o.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if o.len() != m || sorted.len() != m || sorted.last().is_some_and(|&x| x >= d) {
            return Err(Error::invalid(format!("row set must hold {m} distinct indices below {d}")));
        }
    }
    Ok(())
}

fn is_entrywise(f: &Family) -> bool {
    matches!(
        f,
        Family::Gaussian
            | Family::Rademacher
            | Family::Laplace
            | Family::Weibull { .. }
            | Family::StudentT { .. }
            | Family::Zero
    )
}

/// One unit-variance draw from an entrywise family.
fn entry(family: &Family, rng: &mut TrialRng) -> f64 {
    match family {
        Family::Gaussian => rng.sample(StandardNormal),
        Family::Rademacher => {
            if rng.random::<bool>() {
                1.0
            } else {
                -1.0
            }
        }
        Family::Laplace => {
            let e: f64 = rng.sample(Exp1);
            let s = if rng.random::<bool>() { 1.0 } else { -1.0 };
            s * e * std::f64::consts::FRAC_1_SQRT_2
        }
        Family::Weibull { shape } => {
            let w = Weibull::new(1.0, *shape).expect("validated shape").sample(rng);
            let s = if rng.random::<bool>() { 1.0 } else { -1.0 };
            s * w / libm::tgamma(1.0 + 2.0 / shape).sqrt()
        }
        Family::StudentT { degrees } => {
            let t: f64 = StudentT::new(*degrees).expect("validated degrees").sample(rng);
            t * ((degrees - 2.0) / degrees).sqrt()
        }
        Family::Zero => 0.0,
        _ => unreachable!("not an entrywise family"),
    }
}

fn sphere_row(d: usize, rng: &mut TrialRng) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm2(&g);
        if n > 0.0 {
            let s = (d as f64).sqrt() / n;
            return g.into_iter().map(|x| x * s).collect();
        }
    }
}

fn draw_omega(omega: &Option<Vec<usize>>, m: usize, d: usize, rng: &mut TrialRng) -> Vec<usize> {
    match omega {
        Some(o) => o.clone(),
        None => {
            let mut o = sample_indices(rng, d, m).into_vec();
            o.sort_unstable();
            o
        }
    }
}

/// Matrix of `z ↦ (z * c)_Ω`, i.e. `A[i][j] = c[(Ω_i − j) mod d]`.
pub fn circulant_rows(c: &[f64], omega: &[usize]) -> DenseMatrix {
    let d = c.len();
    DenseMatrix::from_fn(omega.len(), d, |i, j| c[(omega[i] + d - j) % d])
}

fn draw_unnormalized(spec: &EnsembleSpec, rng: &mut TrialRng) -> DenseMatrix {
    let (m, d) = (spec.m, spec.d);
    match &spec.family {
        Family::UniformSphereRows => {
            let rows: Vec<Vec<f64>> = (0..m).map(|_| sphere_row(d, rng)).collect();
            DenseMatrix::from_rows(&rows).expect("uniform rows")
        }
        Family::PartialCirculant { generator, omega } => {
            let c = match generator {
                Generator::Random(inner) => (0..d).map(|_| entry(inner, rng)).collect(),
                Generator::Fixed(c) => c.clone(),
            };
            let o = draw_omega(omega, m, d, rng);
            circulant_rows(&c, &o)
        }
        Family::SubsampledDct { omega } => {
            let o = draw_omega(omega, m, d, rng);
            dct2_matrix(d).select_rows(&o).scaled((d as f64).sqrt())
        }
        fam => {
            let data: Vec<f64> = (0..m * d).map(|_| entry(fam, rng)).collect();
            DenseMatrix::new(m, d, data).expect("entrywise draw")
        }
    }
}

/// Deterministic draw of the matrix described by `spec`.
pub fn sample(spec: &EnsembleSpec) -> Result<DenseMatrix> {
    spec.validate()?;
    let mut rng = rng_from_seed(spec.seed);
    let a = draw_unnormalized(spec, &mut rng);
    Ok(match spec.normalization {
        Normalization::RowsByInvSqrtM => a.scaled(1.0 / (spec.m as f64).sqrt()),
        Normalization::None => a,
    })
}

/// One unnormalized measurement vector `φ` distributed like a row of the ensemble.
pub fn sample_row(spec: &EnsembleSpec, rng: &mut TrialRng) -> Vec<f64> {
    let d = spec.d;
    match &spec.family {
        Family::UniformSphereRows => sphere_row(d, rng),
        Family::PartialCirculant { .. } | Family::SubsampledDct { .. } => {
            let sub = EnsembleSpec { seed: rng.next_u64(), normalization: Normalization::None, ..spec.clone() };
            let a = draw_unnormalized(&sub, &mut rng_from_seed(sub.seed));
            let i = rng.random_range(0..spec.m);
            a.row(i).to_vec()
        }
        fam => (0..d).map(|_| entry(fam, rng)).collect(),
    }
}

/// Hoeffding radius at confidence `1 − HOEFFDING_DELTA`.
pub fn hoeffding_radius(trials: usize) -> f64 {
    ((2.0 / HOEFFDING_DELTA).ln() / (2.0 * trials as f64)).sqrt()
}

#[derive(Clone, Debug, Serialize)]
pub struct SmallBallEstimate {
    pub u: f64,
    pub c_hat: f64,
    pub trials: usize,
    pub radius: f64,
}

/// Sampler of unit vectors from a set `S`.
pub type DirectionSampler<'a> = dyn Fn(&mut TrialRng) -> Vec<f64> + Sync + 'a;

/// Frequency of `|⟨φ, x⟩| ≥ u` over fresh pairs `(φ, x)`.
pub fn small_ball_estimate(
    spec: &EnsembleSpec,
    directions: &DirectionSampler<'_>,
    u: f64,
    trials: usize,
    seed: u64,
) -> Result<SmallBallEstimate> {
    spec.validate()?;
    if trials == 0 || !(u >= 0.0) {
        return Err(Error::invalid("small-ball estimate needs trials ≥ 1 and u ≥ 0"));
    }
    let hits = par::map_range(trials, |t| {
        let mut rng = trial_rng(seed, t as u64);
        let x = directions(&mut rng);
        let phi = sample_row(spec, &mut rng);
        u64::from(dot(&phi, &x).abs() >= u)
    });
    let count: u64 = hits.iter().sum();
    Ok(SmallBallEstimate { u, c_hat: count as f64 / trials as f64, trials, radius: hoeffding_radius(trials) })
}

/// Uniform unit vector supported on a uniformly random `k`-subset of `[n]`.
pub fn sparse_sphere_direction(n: usize, k: usize, rng: &mut TrialRng) -> Vec<f64> {
    let support = sample_indices(rng, n, k.clamp(1, n)).into_vec();
    loop {
        let mut x = vec![0.0; n];
        for &j in &support {
            x[j] = rng.sample(StandardNormal);
        }
        let nrm = norm2(&x);
        if nrm > 0.0 {
            x.iter_mut().for_each(|v| *v /= nrm);
            return x;
        }
    }
}

/// Sets whose supremum `sup_{z∈S} ⟨V, z⟩` has a closed form.
#[derive(Clone, Debug)]
pub enum WidthSet {
    /// `Z_k`: unit vectors with at most `k` nonzeros in `R^d`.
    SparseSphere { k: usize },
    /// Cone section `S²_{k,ρ}`, through `(2 + ρ⁻¹)·conv(Z_k)`.
    ConeSection { k: usize, rho: f64 },
    /// `F · Z_k` for a frame `F` (`d × n`).
    FrameImage { frame: DenseMatrix, k: usize },
}

#[derive(Clone, Debug, Serialize)]
pub struct WidthEstimate {
    pub w_hat: f64,
    pub trials: usize,
    pub std_error: f64,
}

fn width_sup(set: &WidthSet, v: &[f64]) -> Result<f64> {
    match set {
        WidthSet::SparseSphere { k } => Ok(top_k_norm2(v, *k)),
        WidthSet::ConeSection { k, rho } => Ok((2.0 + 1.0 / rho) * top_k_norm2(v, *k)),
        WidthSet::FrameImage { frame, k } => Ok(top_k_norm2(&frame.tmatvec(v)?, *k)),
    }
}

/// Monte-Carlo mean of `sup_{z∈S} ⟨m^{-1/2} Σ ε_i φ_i, z⟩`.
pub fn empirical_mean_width(
    spec: &EnsembleSpec,
    set: &WidthSet,
    m: usize,
    trials: usize,
    seed: u64,
) -> Result<WidthEstimate> {
    spec.validate()?;
    if trials == 0 || m == 0 {
        return Err(Error::invalid("width estimate needs m ≥ 1 and trials ≥ 1"));
    }
    match set {
        WidthSet::SparseSphere { k } | WidthSet::ConeSection { k, .. } if *k == 0 || *k > spec.d => {
            return Err(Error::invalid(format!("sparsity {k} outside 1..={}", spec.d)));
        }
        WidthSet::ConeSection { rho, .. } if !(*rho > 0.0) => {
            return Err(Error::invalid("cone parameter must be positive"))
        }
        WidthSet::FrameImage { frame, k } if frame.rows() != spec.d || *k == 0 || *k > frame.cols() => {
            return Err(Error::invalid("frame image does not match the ensemble dimension"));
        }
        _ => {}
    }
    let vals = par::map_range(trials, |t| -> Result<f64> {
        let mut rng = trial_rng(seed, t as u64);
        let mut v = vec![0.0; spec.d];
        for _ in 0..m {
            let phi = sample_row(spec, &mut rng);
            let eps = if rng.random::<bool>() { 1.0 } else { -1.0 };
            v.iter_mut().zip(&phi).for_each(|(a, b)| *a += eps * b);
        }
        let s = 1.0 / (m as f64).sqrt();
        v.iter_mut().for_each(|a| *a *= s);
        width_sup(set, &v)
    });
    let vals = vals.into_iter().collect::<Result<Vec<f64>>>()?;
    let n = trials as f64;
    let mean = compensated_sum(vals.iter().copied()) / n;
    let var = if trials > 1 { compensated_sum(vals.iter().map(|x| (x - mean).powi(2))) / (n - 1.0) } else { 0.0 };
    Ok(WidthEstimate { w_hat: mean, trials, std_error: (var / n).sqrt() })
}

#[derive(Clone, Debug)]
pub enum MomentDirections {
    Canonical,
    Given(Vec<Vec<f64>>),
}

#[derive(Clone, Debug, Serialize)]
pub struct MomentGrowthReport {
    pub max_order: u32,
    /// `(p, max over directions of the empirical L_p norm)`.
    pub norms: Vec<(u32, f64)>,
    /// Least-squares fit of `log L_p = log λ + α log p`.
    pub fitted_lambda: f64,
    pub fitted_alpha: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub pass: bool,
    /// First order at which the bound fails.
    pub first_failure: Option<u32>,
}

/// Empirical `‖⟨φ, a⟩‖_{L_p}` for `p = 2..=K` against `λ p^α (1 + slack)`.
pub fn moment_growth_check(
    spec: &EnsembleSpec,
    max_order: u32,
    directions: &MomentDirections,
    lambda: f64,
    alpha: f64,
    trials: usize,
    seed: u64,
) -> Result<MomentGrowthReport> {
    spec.validate()?;
    if !(2..=20).contains(&max_order) || trials == 0 {
        return Err(Error::invalid("moment check needs 2 ≤ K ≤ 20 and trials ≥ 1"));
    }
    let dirs: Vec<Vec<f64>> = match directions {
        MomentDirections::Canonical => (0..spec.d)
            .map(|j| {
                let mut e = vec![0.0; spec.d];
                e[j] = 1.0;
                e
            })
            .collect(),
        MomentDirections::Given(v) => {
            for a in v {
                if a.len() != spec.d || (norm2(a) - 1.0).abs() > 1e-9 {
                    return Err(Error::invalid("directions must be unit vectors of the ensemble dimension"));
                }
            }
            v.clone()
        }
    };
    if dirs.is_empty() {
        return Err(Error::invalid("no directions supplied"));
    }
    // projections[t][j] = |⟨φ_t, a_j⟩|
    let projections = par::map_range(trials, |t| {
        let mut rng = trial_rng(seed, t as u64);
        let phi = sample_row(spec, &mut rng);
        dirs.iter().map(|a| dot(&phi, a).abs()).collect::<Vec<f64>>()
    });
    let mut norms = Vec::new();
    for p in 2..=max_order {
        let pf = f64::from(p);
        let worst = (0..dirs.len())
            .map(|j| {
                let col = projections.iter().map(|r| r[j].powf(pf));
                (compensated_sum(col) / trials as f64).powf(1.0 / pf)
            })
            .fold(0.0, f64::max);
        norms.push((p, worst));
    }
    let first_failure =
        norms.iter().find(|(p, l)| *l > lambda * f64::from(*p).powf(alpha) * (1.0 + MOMENT_SLACK)).map(|(p, _)| *p);
    let (fitted_lambda, fitted_alpha) = fit_power_law(&norms);
    Ok(MomentGrowthReport {
        max_order,
        norms,
        fitted_lambda,
        fitted_alpha,
        lambda,
        alpha,
        pass: first_failure.is_none(),
        first_failure,
    })
}

fn fit_power_law(norms: &[(u32, f64)]) -> (f64, f64) {
    let pts: Vec<(f64, f64)> =
        norms.iter().filter(|(_, l)| *l > 0.0).map(|(p, l)| (f64::from(*p).ln(), l.ln())).collect();
    if pts.len() < 2 {
        return (0.0, 0.0);
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    let alpha = sxy / sxx;
    ((my - alpha * mx).exp(), alpha)
}
