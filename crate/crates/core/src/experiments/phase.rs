use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::table::{fmt_f64, Table};
use super::{random_sparse_signal, relative_error, DecoderKind};
use crate::decoders::DecodeStatus;
use crate::error::{Error, Result};
use crate::frames::{make_frame, FrameSpec};
use crate::io::config_hash;
use crate::numerics::compensated_sum;
use crate::par;
use crate::rng::{derive_seed, rng_from_seed};
use crate::sensing::{sample, EnsembleSpec, Family, Normalization};
use crate::tolerances::SUCCESS_THRESHOLD;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseConfig {
    pub d: usize,
    /// Sparsifying frame; the identity of size `d` when absent.
    #[serde(default)]
    pub frame: Option<FrameSpec>,
    #[serde(default = "default_family")]
    pub ensemble: Family,
    #[serde(default)]
    pub normalization: Normalization,
    pub k_list: Vec<usize>,
    pub m_list: Vec<usize>,
    pub trials: usize,
    #[serde(default = "default_threshold")]
    pub success_threshold: f64,
    pub seed: u64,
    #[serde(default)]
    pub decoder: DecoderKind,
}

fn default_family() -> Family {
    Family::Gaussian
}

fn default_threshold() -> f64 {
    SUCCESS_THRESHOLD
}

impl PhaseConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 || self.k_list.is_empty() || self.m_list.is_empty() {
            return Err(Error::invalid("phase grid needs trials ≥ 1 and nonempty k and m lists"));
        }
        if let Some(&m) = self.m_list.iter().find(|&&m| m == 0 || m > self.d) {
            return Err(Error::invalid(format!("m = {m} outside 1..={}", self.d)));
        }
        if !(self.success_threshold > 0.0) {
            return Err(Error::invalid("success threshold must be positive"));
        }
        Ok(())
    }

    fn frame_spec(&self) -> FrameSpec {
        self.frame.clone().unwrap_or(FrameSpec::Identity { d: self.d })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub k: usize,
    pub m: usize,
    pub trials: usize,
    pub successes: usize,
    /// Trials where the decoder errored or did not reach `Optimal`.
    pub decoder_failures: usize,
    pub mean_rel_error: f64,
    pub max_rel_error: f64,
    pub mean_decode_ms: f64,
}

impl CellResult {
    pub fn rate(&self) -> f64 {
        self.successes as f64 / self.trials as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub config_hash: String,
    pub seed: u64,
    pub cells: Vec<CellResult>,
}

struct TrialOutcome {
    success: bool,
    decoder_failed: bool,
    rel_error: f64,
    millis: f64,
}

pub fn run_phase_transition(cfg: &PhaseConfig) -> Result<GridResult> {
    cfg.validate()?;
    let frame = make_frame(&cfg.frame_spec())?;
    if frame.dim() != cfg.d {
        return Err(Error::invalid(format!("frame dimension {} differs from d = {}", frame.dim(), cfg.d)));
    }
    let cells: Vec<(usize, usize)> = cfg.k_list.iter().flat_map(|&k| cfg.m_list.iter().map(move |&m| (k, m))).collect();
    let jobs: Vec<(usize, usize, usize)> =
        cells.iter().flat_map(|&(k, m)| (0..cfg.trials).map(move |t| (k, m, t))).collect();
    let outcomes = par::map_slice(&jobs, |&(k, m, t)| -> Result<TrialOutcome> {
        let seed = derive_seed(cfg.seed, &[k as u64, m as u64, t as u64]);
        let spec = EnsembleSpec {
            family: cfg.ensemble.clone(),
            m,
            d: cfg.d,
            seed: derive_seed(seed, &[0]),
            normalization: cfg.normalization,
        };
        let a = sample(&spec)?;
        let mut rng = rng_from_seed(derive_seed(seed, &[1]));
        let (_, z) = random_sparse_signal(&frame, k, &mut rng);
        let y = a.matvec(&z)?;
        let start = Instant::now();
        let res = cfg.decoder.decode(&frame, &a, &y);
        let millis = start.elapsed().as_secs_f64() * 1e3;
        Ok(match res {
            Ok(r) if r.status == DecodeStatus::Optimal => {
                let e = relative_error(&r.z_hat, &z);
                TrialOutcome { success: e <= cfg.success_threshold, decoder_failed: false, rel_error: e, millis }
            }
            Ok(r) => {
                log::debug!("k={k} m={m} trial {t}: decoder ended {:?}", r.status);
                TrialOutcome { success: false, decoder_failed: true, rel_error: relative_error(&r.z_hat, &z), millis }
            }
            Err(e) => {
                log::warn!("k={k} m={m} trial {t}: decoder error: {e}");
                TrialOutcome { success: false, decoder_failed: true, rel_error: f64::INFINITY, millis }
            }
        })
    });
    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
    let mut result = Vec::with_capacity(cells.len());
    for (c, &(k, m)) in cells.iter().enumerate() {
        let cell = &outcomes[c * cfg.trials..(c + 1) * cfg.trials];
        let n = cfg.trials as f64;
        result.push(CellResult {
            k,
            m,
            trials: cfg.trials,
            successes: cell.iter().filter(|o| o.success).count(),
            decoder_failures: cell.iter().filter(|o| o.decoder_failed).count(),
            mean_rel_error: compensated_sum(cell.iter().map(|o| o.rel_error)) / n,
            max_rel_error: cell.iter().map(|o| o.rel_error).fold(0.0, f64::max),
            mean_decode_ms: compensated_sum(cell.iter().map(|o| o.millis)) / n,
        });
    }
    Ok(GridResult { config_hash: config_hash(cfg)?, seed: cfg.seed, cells: result })
}

impl GridResult {
    /// Cells of one sparsity level, sorted by `m`.
    pub fn row(&self, k: usize) -> Vec<&CellResult> {
        let mut v: Vec<&CellResult> = self.cells.iter().filter(|c| c.k == k).collect();
        v.sort_by_key(|c| c.m);
        v
    }

    /// Long-format table; timings stay out so the CSV is reproducible.
    pub fn table(&self) -> Table {
        let mut t = Table::new(&[
            "k",
            "m",
            "trials",
            "successes",
            "success_rate",
            "decoder_failures",
            "mean_rel_error",
            "max_rel_error",
        ]);
        for c in &self.cells {
            t.push(vec![
                c.k.to_string(),
                c.m.to_string(),
                c.trials.to_string(),
                c.successes.to_string(),
                fmt_f64(c.rate()),
                c.decoder_failures.to_string(),
                fmt_f64(c.mean_rel_error),
                fmt_f64(c.max_rel_error),
            ]);
        }
        t
    }
}

/// Smallest `m` where the success rate reaches 1/2, linearly interpolated
/// between the bracketing grid points. `points` must be sorted by `m`.
pub fn m50(points: &[(usize, f64)]) -> Option<f64> {
    let i = points.iter().position(|&(_, r)| r >= 0.5)?;
    if i == 0 {
        return Some(points[0].0 as f64);
    }
    let (m0, r0) = (points[i - 1].0 as f64, points[i - 1].1);
    let (m1, r1) = (points[i].0 as f64, points[i].1);
    Some(m0 + (0.5 - r0) / (r1 - r0) * (m1 - m0))
}

/// True when no later grid point falls below an earlier one by more than
/// two binomial standard deviations of their difference.
pub fn monotone_within_bands(points: &[(usize, f64)], trials: usize) -> bool {
    let var = |p: f64| p * (1.0 - p) / trials as f64;
    points
        .iter()
        .enumerate()
        .all(|(i, &(_, ri))| points[i + 1..].iter().all(|&(_, rj)| rj >= ri - 2.0 * (var(ri) + var(rj)).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> PhaseConfig {
        PhaseConfig {
            d: 8,
            frame: None,
            ensemble: Family::Gaussian,
            normalization: Normalization::RowsByInvSqrtM,
            k_list: vec![0, 2],
            m_list: vec![8],
            trials: 5,
            success_threshold: SUCCESS_THRESHOLD,
            seed: 11,
            decoder: DecoderKind::BpEq,
        }
    }

    #[test]
    fn square_and_zero_signal_always_succeed() {
        let g = run_phase_transition(&cfg()).unwrap();
        assert!(g.cells.iter().all(|c| c.successes == c.trials), "{:?}", g.cells);
    }

    #[test]
    fn m50_interpolates() {
        assert_eq!(m50(&[(4, 0.0), (6, 0.4), (8, 0.6)]), Some(7.0));
        assert_eq!(m50(&[(4, 0.7)]), Some(4.0));
        assert_eq!(m50(&[(4, 0.1)]), None);
    }

    #[test]
    fn band_check() {
        assert!(monotone_within_bands(&[(4, 0.1), (6, 0.08), (8, 0.9)], 200));
        assert!(!monotone_within_bands(&[(4, 0.9), (6, 0.1)], 200));
    }

    #[test]
    fn config_rejects_bad_m() {
        let mut c = cfg();
        c.m_list = vec![9];
        assert!(run_phase_transition(&c).is_err());
    }
}
