use serde::{Deserialize, Serialize};

use super::relative_error;
use super::table::{fmt_f64, Table};
use crate::combinatorics::{sign_patterns, subsets};
use crate::decoders::{basis_pursuit_eq, l1_synthesis};
use crate::error::{Error, Result};
use crate::frames::{make_frame, scale_columns, Frame, FrameSpec, FullSpark};
use crate::io::config_hash;
use crate::numerics::{kernel_basis, norm1, norm2, range_basis, DenseMatrix, Vector};
use crate::par;
use crate::properties::{
    f_rip_constant_exact, nsp_breaking_diagonal, nsp_breaking_from_vector, nsp_check_exact, NspBreaking,
};
use crate::rng::derive_seed;
use crate::sensing::{sample, EnsembleSpec, Family, Normalization};
use crate::tolerances::{SUCCESS_THRESHOLD, WITNESS_TOL};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NspScalingConfig {
    pub m: usize,
    pub d: usize,
    pub k: usize,
    #[serde(default = "gaussian")]
    pub ensemble: Family,
    pub trials: usize,
    /// Draws per trial while looking for a matrix with certified NSP.
    pub resample_budget: usize,
    pub seed: u64,
}

fn gaussian() -> Family {
    Family::Gaussian
}

impl Default for NspScalingConfig {
    fn default() -> Self {
        NspScalingConfig { m: 6, d: 12, k: 1, ensemble: Family::Gaussian, trials: 100, resample_budget: 50, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NspScalingTrial {
    pub trial: usize,
    /// Draws needed for a matrix with certified NSP.
    pub draws: usize,
    pub certified_b: bool,
    pub control_holds: bool,
    pub bd_fails: bool,
    /// `‖w_T‖₁ − ‖w_{Tᶜ}‖₁`, which should equal 1.
    pub gap: f64,
    /// `‖B D w‖₂ / ‖w‖₂`.
    pub kernel_residual: f64,
    /// Relative error of basis pursuit on the k-sparse `w_T`.
    pub decode_rel_error: f64,
    pub roundtrip_identical: bool,
    pub construction: Option<NspBreaking>,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NspScalingReport {
    pub config_hash: String,
    pub trials: Vec<NspScalingTrial>,
    pub passed: usize,
}

impl NspScalingReport {
    pub fn all_pass(&self) -> bool {
        self.passed == self.trials.len()
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new(&[
            "trial",
            "draws",
            "certified_b",
            "control_holds",
            "bd_fails",
            "gap",
            "kernel_residual",
            "decode_rel_error",
            "roundtrip_identical",
            "pass",
        ]);
        for r in &self.trials {
            t.push(vec![
                r.trial.to_string(),
                r.draws.to_string(),
                r.certified_b.to_string(),
                r.control_holds.to_string(),
                r.bd_fails.to_string(),
                fmt_f64(r.gap),
                fmt_f64(r.kernel_residual),
                fmt_f64(r.decode_rel_error),
                r.roundtrip_identical.to_string(),
                r.pass.to_string(),
            ]);
        }
        t
    }
}

fn gap_of(b: &NspBreaking) -> f64 {
    let on: f64 = b.support.iter().map(|&j| b.w[j].abs()).sum();
    on - (norm1(&b.w) - on)
}

fn nsp_scaling_trial(cfg: &NspScalingConfig, t: usize) -> Result<NspScalingTrial> {
    let mut out = NspScalingTrial {
        trial: t,
        draws: 0,
        certified_b: false,
        control_holds: false,
        bd_fails: false,
        gap: f64::NAN,
        kernel_residual: f64::NAN,
        decode_rel_error: f64::NAN,
        roundtrip_identical: false,
        construction: None,
        pass: false,
    };
    let mut b = None;
    for j in 0..cfg.resample_budget {
        let spec = EnsembleSpec {
            family: cfg.ensemble.clone(),
            m: cfg.m,
            d: cfg.d,
            seed: derive_seed(cfg.seed, &[t as u64, j as u64]),
            normalization: Normalization::RowsByInvSqrtM,
        };
        let cand = sample(&spec)?;
        out.draws = j + 1;
        if nsp_check_exact(&cand, cfg.k)?.holds() {
            b = Some(cand);
            break;
        }
        log::debug!("trial {t}: draw {j} lacks the null space property, resampling");
    }
    let Some(b) = b else { return Ok(out) };
    out.certified_b = true;
    out.control_holds = nsp_check_exact(&b.scale_columns(&vec![1.0; cfg.d])?, cfg.k)?.holds();

    let br = nsp_breaking_diagonal(&b, cfg.k)?;
    let bd = b.scale_columns(&br.diagonal)?;
    out.bd_fails = nsp_check_exact(&bd, cfg.k)?.fails();
    out.gap = gap_of(&br);
    out.kernel_residual = norm2(&bd.matvec(&br.w)?) / norm2(&br.w);

    // w_T is k-sparse, while −w_{Tᶜ} has the same image and ℓ₁ norm smaller by one
    let mut x0 = vec![0.0; cfg.d];
    for &j in &br.support {
        x0[j] = br.w[j];
    }
    let r = basis_pursuit_eq(&bd, &bd.matvec(&x0)?)?;
    out.decode_rel_error = relative_error(&r.z_hat, &x0);

    let json = serde_json::to_string(&br)?;
    let back: NspBreaking = serde_json::from_str(&json)?;
    out.roundtrip_identical = gap_of(&back).to_bits() == out.gap.to_bits() && back.diagonal == br.diagonal;

    out.pass = out.control_holds
        && out.bd_fails
        && (out.gap - 1.0).abs() <= WITNESS_TOL * 10.0
        && out.kernel_residual <= 1e-8
        && out.decode_rel_error > SUCCESS_THRESHOLD
        && out.roundtrip_identical;
    out.construction = Some(br);
    Ok(out)
}

/// Certified-NSP matrices `B` whose null space property is destroyed by a
/// diagonal column scaling, with a basis-pursuit failure exhibited for each.
pub fn run_lemma_nsp_scaling(cfg: &NspScalingConfig) -> Result<NspScalingReport> {
    if cfg.k == 0 || cfg.k > cfg.d || cfg.m == 0 || cfg.m >= cfg.d || cfg.trials == 0 || cfg.resample_budget == 0 {
        return Err(Error::invalid("need 1 ≤ k ≤ d, 1 ≤ m < d, trials ≥ 1 and a positive resample budget"));
    }
    let trials = par::map_range(cfg.trials, |t| nsp_scaling_trial(cfg, t));
    let trials = trials.into_iter().collect::<Result<Vec<_>>>()?;
    let passed = trials.iter().filter(|t| t.pass).count();
    Ok(NspScalingReport { config_hash: config_hash(cfg)?, trials, passed })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DripConfig {
    pub d: usize,
    pub n: usize,
    /// Rows of `A`; must be below `d` for recovery to be able to fail.
    pub m: usize,
    pub k: usize,
    pub delta_target: f64,
    pub seed: u64,
    pub retry_budget: usize,
    /// Draws of `A` per attempt.
    pub draws_per_attempt: usize,
}

impl Default for DripConfig {
    fn default() -> Self {
        DripConfig { d: 6, n: 9, m: 5, k: 1, delta_target: 0.3, seed: 0, retry_budget: 20, draws_per_attempt: 400 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DripAttempt {
    pub attempt: usize,
    /// Last stage that passed (0 when the frame was rejected).
    pub stage: u8,
    pub note: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DripReport {
    pub config_hash: String,
    pub attempts: Vec<DripAttempt>,
    pub success: bool,
    pub frame: Option<DenseMatrix>,
    pub a: Option<DenseMatrix>,
    pub a_draws: usize,
    pub delta_before: f64,
    pub delta_after: f64,
    pub construction: Option<NspBreaking>,
    pub z0: Option<Vector>,
    pub synthesis_rel_error: f64,
    pub control_recovered: usize,
    pub control_total: usize,
    pub control_max_rel_error: f64,
}

impl DripReport {
    pub fn table(&self) -> Table {
        let mut t = Table::new(&["attempt", "stage", "note"]);
        for a in &self.attempts {
            t.push(vec![a.attempt.to_string(), a.stage.to_string(), a.note.clone()]);
        }
        t
    }
}

/// `A` with orthonormal rows spanning the row space of a Gaussian draw.
fn orthonormal_rows(m: usize, d: usize, seed: u64) -> Result<DenseMatrix> {
    let g = sample(&EnsembleSpec { family: Family::Gaussian, m, d, seed, normalization: Normalization::None })?;
    Ok(range_basis(&g.transpose())?.transpose())
}

/// Kernel vector of `A F` with the largest component in the row space of
/// `F`, so that `F v ≠ 0`.
fn visible_kernel_vector(af: &DenseMatrix, f: &DenseMatrix) -> Result<Option<Vec<f64>>> {
    let kernel = kernel_basis(af)?;
    let rows = range_basis(&f.transpose())?;
    let mut best: Option<(f64, Vec<f64>)> = None;
    for j in 0..kernel.cols() {
        let col = kernel.column(j);
        let proj = rows.matvec(&rows.tmatvec(&col)?)?;
        let nv = norm2(&proj);
        if best.as_ref().is_none_or(|b| nv > b.0 + 1e-12) {
            best = Some((nv, proj));
        }
    }
    Ok(best.filter(|b| b.0 > 1e-8).map(|b| b.1))
}

fn control_check(frame: &Frame, a: &DenseMatrix, k: usize) -> Result<(usize, usize, f64)> {
    let n = frame.len();
    let cases: Vec<(Vec<usize>, Vec<i8>)> = subsets(n, k)
        .into_iter()
        .flat_map(|t| sign_patterns(k, false).into_iter().map(move |s| (t.clone(), s)))
        .collect();
    let errs = par::map_slice(&cases, |(t, s)| -> Result<f64> {
        let mut x = vec![0.0; n];
        for (&j, &sj) in t.iter().zip(s) {
            x[j] = f64::from(sj);
        }
        let z0 = frame.synthesize(&x)?;
        let r = l1_synthesis(frame, a, &a.matvec(&z0)?, 0.0)?;
        Ok(relative_error(&r.z_hat, &z0))
    });
    let errs = errs.into_iter().collect::<Result<Vec<f64>>>()?;
    let ok = errs.iter().filter(|&&e| e <= 1e-6).count();
    Ok((ok, errs.len(), errs.iter().copied().fold(0.0, f64::max)))
}

/// Five stages: a full-spark frame `F`; a matrix `A` with exact F-RIP
/// `δ_{2k} ≤ δ_target` and `A F` satisfying the null space property; a
/// diagonal `D` breaking it for `A F D`; the F-RIP constant unchanged for
/// `F D`; an F-k-sparse signal that synthesis decoding with `F D` misses.
pub fn run_theorem_dripbad_demo(cfg: &DripConfig) -> Result<DripReport> {
    if cfg.k == 0 || 2 * cfg.k > cfg.n || cfg.n < cfg.d || cfg.m == 0 || cfg.m >= cfg.d || cfg.retry_budget == 0 {
        return Err(Error::invalid("need 1 ≤ 2k ≤ n, d ≤ n, 1 ≤ m < d and a positive retry budget"));
    }
    let mut report = DripReport {
        config_hash: config_hash(cfg)?,
        attempts: Vec::new(),
        success: false,
        frame: None,
        a: None,
        a_draws: 0,
        delta_before: f64::NAN,
        delta_after: f64::NAN,
        construction: None,
        z0: None,
        synthesis_rel_error: f64::NAN,
        control_recovered: 0,
        control_total: 0,
        control_max_rel_error: f64::NAN,
    };
    for attempt in 0..cfg.retry_budget {
        let seed = derive_seed(cfg.seed, &[attempt as u64]);
        let mut log_attempt = |stage: u8, note: String| {
            log::info!("attempt {attempt}: stage {stage}: {note}");
            report.attempts.push(DripAttempt { attempt, stage, note });
        };

        let frame = make_frame(&FrameSpec::Gaussian {
            d: cfg.d,
            n: cfg.n,
            seed: derive_seed(seed, &[1]),
            unit_norm_columns: true,
        })?;
        if frame.full_spark() != &FullSpark::Yes {
            log_attempt(0, format!("frame not certified full spark: {:?}", frame.full_spark()));
            continue;
        }
        let f = frame.matrix();

        // stage 2: exact F-RIP after optimal scaling, plus NSP of A F
        let draws = par::map_range(cfg.draws_per_attempt, |j| -> Result<Option<(DenseMatrix, f64)>> {
            let a0 = orthonormal_rows(cfg.m, cfg.d, derive_seed(seed, &[2, j as u64]))?;
            let rip = f_rip_constant_exact(&a0, f, 2 * cfg.k)?;
            let delta = (rip.upper - rip.lower) / (rip.upper + rip.lower);
            if delta > cfg.delta_target {
                return Ok(None);
            }
            let a = a0.scaled((2.0 / (rip.lower + rip.upper)).sqrt());
            Ok(nsp_check_exact(&a.matmul(f)?, cfg.k)?.holds().then_some((a, delta)))
        });
        let mut chosen = None;
        for (j, d) in draws.into_iter().enumerate() {
            if let Some(hit) = d? {
                chosen = Some((j + 1, hit));
                break;
            }
        }
        let Some((a_draws, (a, _))) = chosen else {
            log_attempt(
                1,
                format!("no A with δ ≤ {} and certified NSP in {} draws", cfg.delta_target, cfg.draws_per_attempt),
            );
            continue;
        };
        let delta_before = f_rip_constant_exact(&a, f, 2 * cfg.k)?.delta;

        // stage 3: break the null space property of A F by scaling columns
        let af = a.matmul(f)?;
        let Some(v) = visible_kernel_vector(&af, f)? else {
            log_attempt(2, "kernel of AF lies inside the kernel of F".into());
            continue;
        };
        let br = nsp_breaking_from_vector(&v, cfg.k)?;
        let fd = scale_columns(&frame, &br.diagonal)?;
        if !nsp_check_exact(&a.matmul(fd.matrix())?, cfg.k)?.fails() {
            log_attempt(2, "scaled product still certified to have the null space property".into());
            continue;
        }

        // stage 4: Σ_{FD,2k} = Σ_{F,2k}, so the F-RIP constant is unchanged
        let delta_after = f_rip_constant_exact(&a, fd.matrix(), 2 * cfg.k)?.delta;
        if (delta_after - delta_before).abs() > 1e-9 {
            log_attempt(3, format!("F-RIP changed under scaling: {delta_before} vs {delta_after}"));
            continue;
        }

        // stage 5: the signal F D w_T is not recovered
        let n = cfg.n;
        let mut best: Option<(f64, Vec<f64>)> = None;
        let mut wt = vec![0.0; n];
        for &j in &br.support {
            wt[j] = br.w[j];
        }
        let mut candidates = vec![wt.clone(), wt.iter().map(|x| -x).collect::<Vec<_>>()];
        for &j in &br.support {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            candidates.push(e);
        }
        for x0 in candidates {
            let z0 = fd.synthesize(&x0)?;
            let r = l1_synthesis(&fd, &a, &a.matvec(&z0)?, 0.0)?;
            let e = relative_error(&r.z_hat, &z0);
            if best.as_ref().is_none_or(|b| e > b.0) {
                best = Some((e, z0));
            }
        }
        let (err, z0) = best.expect("candidates are nonempty");
        if err <= 0.1 {
            log_attempt(4, format!("largest synthesis error found was {err:.3e}"));
            continue;
        }
        let (ok, total, worst) = control_check(&frame, &a, cfg.k)?;
        log_attempt(5, format!("synthesis relative error {err:.4}; control recovered {ok}/{total}"));

        report.success = true;
        report.frame = Some(f.clone());
        report.a = Some(a);
        report.a_draws = a_draws;
        report.delta_before = delta_before;
        report.delta_after = delta_after;
        report.construction = Some(br);
        report.z0 = Some(z0.into());
        report.synthesis_rel_error = err;
        report.control_recovered = ok;
        report.control_total = total;
        report.control_max_rel_error = worst;
        break;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nsp_scaling_small_run() {
        let cfg = NspScalingConfig { trials: 5, seed: 3, ..Default::default() };
        let r = run_lemma_nsp_scaling(&cfg).unwrap();
        assert!(r.all_pass(), "{:#?}", r.trials);
    }

    #[test]
    fn invalid_configs() {
        assert!(run_lemma_nsp_scaling(&NspScalingConfig { m: 12, ..Default::default() }).is_err());
        assert!(run_theorem_dripbad_demo(&DripConfig { m: 6, ..Default::default() }).is_err());
    }
}
