use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::table::{fmt_f64, Table};
use crate::decoders::{error_bound, qcbp, BoundParams, DecodeStatus};
use crate::error::{Error, Result};
use crate::io::config_hash;
use crate::numerics::{add, l1_tail, norm2, scale, sub, DenseMatrix, Vector};
use crate::par;
use crate::properties::{rip_constant_exact, rnsp_from_rip};
use crate::rng::{derive_seed, rng_from_seed, TrialRng};
use crate::sensing::{sample, EnsembleSpec, Family, Normalization};
use crate::tolerances::rip_rnsp_threshold;

/// Law of the test signals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    /// Exactly k-sparse with Gaussian entries.
    Sparse,
    /// Sorted magnitudes `i^{-exponent}`, random signs and positions.
    PowerLaw { exponent: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub m: usize,
    pub d: usize,
    /// Sparsity of the guarantee; RIP is certified at order `2k`.
    pub k: usize,
    #[serde(default = "gaussian")]
    pub ensemble: Family,
    pub matrices: usize,
    pub instances: usize,
    pub eta_list: Vec<f64>,
    pub profile: Profile,
    /// Accept a matrix when its optimally scaled `δ_{2k}` is below this.
    pub delta_target: f64,
    /// Draws tried per matrix before giving up on it.
    pub draw_budget: usize,
    pub seed: u64,
}

fn gaussian() -> Family {
    Family::Gaussian
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixSummary {
    pub index: usize,
    pub accepted: bool,
    pub draws: usize,
    /// Seed of the accepted draw, or of the best rejected one.
    pub draw_seed: u64,
    pub scale: f64,
    /// Best `δ_{2k}` seen over the draws.
    pub delta: f64,
    pub rho: Option<f64>,
    pub tau: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub matrix: usize,
    pub instance: usize,
    pub eta: f64,
    pub sigma: f64,
    pub observed: f64,
    pub bound: f64,
    pub status: DecodeStatus,
    pub violated: bool,
}

/// Everything needed to replay a violation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViolationDump {
    pub row: SweepRow,
    pub draw_seed: u64,
    pub scale: f64,
    pub z: Vector,
    pub w: Vector,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub config_hash: String,
    pub matrices: Vec<MatrixSummary>,
    pub rows: Vec<SweepRow>,
    pub violations: Vec<ViolationDump>,
}

impl SweepReport {
    pub fn accepted(&self) -> usize {
        self.matrices.iter().filter(|m| m.accepted).count()
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new(&["matrix", "instance", "eta", "sigma", "observed", "bound", "status", "violated"]);
        for r in &self.rows {
            t.push(vec![
                r.matrix.to_string(),
                r.instance.to_string(),
                fmt_f64(r.eta),
                fmt_f64(r.sigma),
                fmt_f64(r.observed),
                fmt_f64(r.bound),
                format!("{:?}", r.status),
                r.violated.to_string(),
            ]);
        }
        t
    }
}

/// Draws a signal of the given profile with unit ℓ₂ norm.
pub fn profile_signal(profile: &Profile, d: usize, k: usize, rng: &mut TrialRng) -> Vec<f64> {
    let mut z = vec![0.0; d];
    match profile {
        Profile::Sparse => {
            for j in rand::seq::index::sample(rng, d, k.min(d)) {
                z[j] = rng.sample(StandardNormal);
            }
        }
        Profile::PowerLaw { exponent } => {
            let mut pos: Vec<usize> = (0..d).collect();
            pos.shuffle(rng);
            for (i, &j) in pos.iter().enumerate() {
                let s = if rng.random::<bool>() { 1.0 } else { -1.0 };
                z[j] = s * ((i + 1) as f64).powf(-exponent);
            }
        }
    }
    let n = norm2(&z);
    if n > 0.0 {
        z.iter_mut().for_each(|v| *v /= n);
    }
    z
}

fn noise(m: usize, eta: f64, rng: &mut TrialRng) -> Vec<f64> {
    if eta == 0.0 {
        return vec![0.0; m];
    }
    loop {
        let g: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm2(&g);
        if n > 0.0 {
            return scale(&g, eta / n);
        }
    }
}

/// Draws until the optimally scaled matrix has `δ_{2k} < delta_target`.
/// The scaling `c² = 2/(λ_min + λ_max)` equalizes both deviations.
fn certify_matrix(cfg: &SweepConfig, index: usize) -> Result<(MatrixSummary, Option<DenseMatrix>)> {
    let mut best = MatrixSummary {
        index,
        accepted: false,
        draws: 0,
        draw_seed: 0,
        scale: 1.0,
        delta: f64::INFINITY,
        rho: None,
        tau: None,
    };
    for j in 0..cfg.draw_budget {
        let seed = derive_seed(cfg.seed, &[index as u64, j as u64]);
        let spec =
            EnsembleSpec { family: cfg.ensemble.clone(), m: cfg.m, d: cfg.d, seed, normalization: Normalization::None };
        let a = sample(&spec)?;
        let rip = rip_constant_exact(&a, 2 * cfg.k)?;
        let c = (2.0 / (rip.lower + rip.upper)).sqrt();
        let delta = (rip.upper - rip.lower) / (rip.upper + rip.lower);
        best.draws = j + 1;
        if delta < best.delta {
            best.delta = delta;
            best.draw_seed = seed;
            best.scale = c;
        }
        if delta < cfg.delta_target && delta < rip_rnsp_threshold() {
            let (rho, tau) = rnsp_from_rip(delta)?;
            best.accepted = true;
            best.rho = Some(rho);
            best.tau = Some(tau);
            return Ok((best, Some(a.scaled(c))));
        }
    }
    log::warn!(
        "matrix {index}: no draw reached δ < {} in {} draws (best {:.4})",
        cfg.delta_target,
        cfg.draw_budget,
        best.delta
    );
    Ok((best, None))
}

/// Compares observed QCBP errors with the ℓ₂ guarantee obtained from an
/// exactly computed RIP constant.
pub fn run_robustness_sweep(cfg: &SweepConfig) -> Result<SweepReport> {
    if cfg.k == 0
        || 2 * cfg.k > cfg.d
        || cfg.m == 0
        || cfg.matrices == 0
        || cfg.instances == 0
        || cfg.eta_list.is_empty()
    {
        return Err(Error::invalid("sweep needs 1 ≤ 2k ≤ d, m ≥ 1 and nonempty matrices, instances and η lists"));
    }
    if cfg.eta_list.iter().any(|&e| !(e >= 0.0)) {
        return Err(Error::invalid("noise levels must be nonnegative"));
    }
    let mut report =
        SweepReport { config_hash: config_hash(cfg)?, matrices: Vec::new(), rows: Vec::new(), violations: Vec::new() };
    for i in 0..cfg.matrices {
        let (summary, a) = certify_matrix(cfg, i)?;
        if let Some(a) = a {
            let (rho, tau) = (summary.rho.unwrap(), summary.tau.unwrap());
            let params = BoundParams::RnspLp { rho, tau, k: cfg.k, p: 2.0, q: 2.0 };
            let jobs: Vec<(usize, usize)> =
                (0..cfg.instances).flat_map(|s| (0..cfg.eta_list.len()).map(move |e| (s, e))).collect();
            let results = par::map_slice(&jobs, |&(s, e)| -> Result<(SweepRow, Vec<f64>, Vec<f64>)> {
                let eta = cfg.eta_list[e];
                let mut rng = rng_from_seed(derive_seed(cfg.seed, &[1 << 32 | i as u64, s as u64]));
                let z = profile_signal(&cfg.profile, cfg.d, cfg.k, &mut rng);
                let mut nrng = rng_from_seed(derive_seed(cfg.seed, &[2 << 32 | i as u64, s as u64, e as u64]));
                let w = noise(cfg.m, eta, &mut nrng);
                let y = add(&a.matvec(&z)?, &w);
                let r = qcbp(&a, &y, eta)?;
                let observed = norm2(&sub(&z, &r.z_hat));
                let sigma = l1_tail(&z, cfg.k);
                let bound = error_bound(&params, sigma, eta)?;
                let row = SweepRow {
                    matrix: i,
                    instance: s,
                    eta,
                    sigma,
                    observed,
                    bound,
                    status: r.status,
                    violated: observed > bound + 1e-6,
                };
                Ok((row, z, w))
            });
            for res in results {
                let (row, z, w) = res?;
                if row.violated {
                    report.violations.push(ViolationDump {
                        row: row.clone(),
                        draw_seed: summary.draw_seed,
                        scale: summary.scale,
                        z: z.into(),
                        w: w.into(),
                    });
                }
                report.rows.push(row);
            }
        }
        report.matrices.push(summary);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_law_profile_is_unit_and_decaying() {
        let mut rng = rng_from_seed(1);
        let z = profile_signal(&Profile::PowerLaw { exponent: 1.0 }, 10, 2, &mut rng);
        assert!((norm2(&z) - 1.0).abs() < 1e-12);
        let mut mags: Vec<f64> = z.iter().map(|v| v.abs()).collect();
        mags.sort_by(|a, b| b.total_cmp(a));
        assert!((mags[0] / mags[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn noise_has_exact_norm() {
        let mut rng = rng_from_seed(2);
        assert!((norm2(&noise(7, 0.3, &mut rng)) - 0.3).abs() < 1e-14);
        assert_eq!(noise(3, 0.0, &mut rng), vec![0.0; 3]);
    }
}
