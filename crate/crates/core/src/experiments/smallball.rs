use serde::{Deserialize, Serialize};

use super::table::{fmt_f64, Table};
use crate::error::{Error, Result};
use crate::io::config_hash;
use crate::numerics::{norm2, DenseMatrix};
use crate::par;
use crate::rng::{derive_seed, rng_from_seed, TrialRng};
use crate::sensing::{
    empirical_mean_width, sample, small_ball_estimate, sparse_sphere_direction, EnsembleSpec, Family, Normalization,
    WidthSet,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmallBallConfig {
    #[serde(default = "gaussian")]
    pub ensemble: Family,
    pub d: usize,
    /// Sparsity of the direction set `Z_k`.
    pub k: usize,
    pub m: usize,
    pub u: f64,
    pub t: f64,
    pub repetitions: usize,
    /// Size of the finite sample standing in for `Z_k`.
    pub sample_size: usize,
    pub q_trials: usize,
    pub w_trials: usize,
    pub seed: u64,
}

fn gaussian() -> Family {
    Family::Gaussian
}

impl Default for SmallBallConfig {
    fn default() -> Self {
        SmallBallConfig {
            ensemble: Family::Gaussian,
            d: 20,
            k: 2,
            m: 50,
            u: 0.5,
            t: 2.0,
            repetitions: 500,
            sample_size: 200,
            q_trials: 20_000,
            w_trials: 2_000,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmallBallReport {
    pub config_hash: String,
    /// Estimate of `Q_{2u}` as the mean frequency over the sampled set.
    pub q_hat: f64,
    pub q_radius: f64,
    pub w_hat: f64,
    pub w_std_error: f64,
    /// `u √m Q_{2u} − 2 W_m − u t`.
    pub rhs: f64,
    /// Per repetition: the minimum of `‖Φ x‖₂` over the sampled set.
    pub lhs: Vec<f64>,
    pub holds: usize,
    pub repetitions: usize,
    pub frequency: f64,
    /// `1 − exp(−t²/2)`.
    pub target: f64,
}

impl SmallBallReport {
    pub fn table(&self) -> Table {
        let mut t = Table::new(&["repetition", "lhs", "rhs", "holds"]);
        for (i, l) in self.lhs.iter().enumerate() {
            t.push(vec![i.to_string(), fmt_f64(*l), fmt_f64(self.rhs), (*l >= self.rhs).to_string()]);
        }
        t
    }
}

/// Checks `inf_{x∈S} ‖Φ x‖₂ ≥ u√m Q_{2u} − 2W_m − ut` over repeated draws
/// of `Φ`, with the infimum taken over a fixed finite sample of `Z_k`.
/// The sampled infimum upper-bounds the true one, so the check is one-sided.
pub fn run_smallball_verification(cfg: &SmallBallConfig) -> Result<SmallBallReport> {
    if cfg.k == 0 || cfg.k > cfg.d || cfg.m == 0 || cfg.repetitions == 0 || cfg.sample_size == 0 {
        return Err(Error::invalid("need 1 ≤ k ≤ d and positive m, repetitions and sample size"));
    }
    if !(cfg.u > 0.0 && cfg.t > 0.0) {
        return Err(Error::invalid("u and t must be positive"));
    }
    let spec = EnsembleSpec {
        family: cfg.ensemble.clone(),
        m: cfg.m,
        d: cfg.d,
        seed: derive_seed(cfg.seed, &[0]),
        normalization: Normalization::None,
    };
    spec.validate()?;
    let mut srng = rng_from_seed(derive_seed(cfg.seed, &[1]));
    let set: Vec<Vec<f64>> = (0..cfg.sample_size).map(|_| sparse_sphere_direction(cfg.d, cfg.k, &mut srng)).collect();
    let set_m = DenseMatrix::from_columns(cfg.d, &set)?;

    let pick = |rng: &mut TrialRng| {
        use rand::Rng;
        set[rng.random_range(0..set.len())].clone()
    };
    let q = small_ball_estimate(&spec, &pick, 2.0 * cfg.u, cfg.q_trials, derive_seed(cfg.seed, &[2]))?;
    let w = empirical_mean_width(
        &spec,
        &WidthSet::SparseSphere { k: cfg.k },
        cfg.m,
        cfg.w_trials,
        derive_seed(cfg.seed, &[3]),
    )?;
    let rhs = cfg.u * (cfg.m as f64).sqrt() * q.c_hat - 2.0 * w.w_hat - cfg.u * cfg.t;

    let lhs = par::map_range(cfg.repetitions, |r| -> Result<f64> {
        let phi = sample(&spec.with_seed(derive_seed(cfg.seed, &[4, r as u64])))?;
        let images = phi.matmul(&set_m)?;
        Ok((0..images.cols()).map(|j| norm2(&images.column(j))).fold(f64::INFINITY, f64::min))
    });
    let lhs = lhs.into_iter().collect::<Result<Vec<f64>>>()?;
    let holds = lhs.iter().filter(|&&l| l >= rhs).count();
    Ok(SmallBallReport {
        config_hash: config_hash(cfg)?,
        q_hat: q.c_hat,
        q_radius: q.radius,
        w_hat: w.w_hat,
        w_std_error: w.std_error,
        rhs,
        holds,
        repetitions: cfg.repetitions,
        frequency: holds as f64 / cfg.repetitions as f64,
        target: 1.0 - (-cfg.t * cfg.t / 2.0).exp(),
        lhs,
    })
}
