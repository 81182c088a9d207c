//! Experiment subcommands: run, assert, write CSV/JSON and a manifest.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::Serialize;
use serde_json::Value;

use fsl_core::experiments::{
    m50, monotone_within_bands, run_lemma_nsp_scaling, run_phase_transition, run_robustness_sweep,
    run_smallball_verification, run_theorem_dripbad_demo, summarize, DecoderKind, DripConfig, NspScalingConfig,
    PhaseConfig, SmallBallConfig, SweepConfig, Table,
};
use fsl_core::io::{write_json, RunManifest};

use crate::commands::{json_arg, resolve};
use crate::{emit, CliError, CliResult};

const EXIT_ASSERTION: u8 = 30;

#[derive(Args, Debug)]
pub struct ExperimentArgs {
    /// JSON config, inline or as a file path. Keys override the defaults.
    #[arg(long)]
    config: Option<String>,
    /// Output directory.
    #[arg(long, env = "FSL_OUTPUT_DIR")]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

impl ExperimentArgs {
    fn config<T: Serialize + serde::de::DeserializeOwned>(&self, default: Option<T>) -> CliResult<T> {
        let base = match default {
            Some(d) => serde_json::to_value(d)?,
            None => Value::Object(Default::default()),
        };
        let overrides = match &self.config {
            Some(c) => Some(json_arg(c)?),
            None if base.as_object().is_some_and(|m| m.is_empty()) => {
                return Err(CliError::usage("this experiment has no defaults; pass --config"));
            }
            None => None,
        };
        // a default's own seed must not count as an explicit one
        let base = match base {
            Value::Object(mut m) => {
                m.remove("seed");
                Value::Object(m)
            }
            v => v,
        };
        resolve(base, overrides, self.seed)
    }

    fn out(&self) -> CliResult<&Path> {
        self.out.as_deref().ok_or_else(|| CliError::usage("no output directory: pass --out or set FSL_OUTPUT_DIR"))
    }
}

#[derive(Serialize)]
struct Outcome<'a, R: Serialize> {
    command: &'a str,
    passed: bool,
    failures: &'a [String],
    manifest: PathBuf,
    outputs: &'a [PathBuf],
    report: &'a R,
}

fn finish<C: Serialize, R: Serialize>(
    command: &str,
    args: &ExperimentArgs,
    config: &C,
    table: &Table,
    report: &R,
    failures: Vec<String>,
    extra: Vec<PathBuf>,
) -> CliResult<u8> {
    let dir = args.out()?;
    let seed = serde_json::to_value(config)?["seed"].as_u64().unwrap_or_default();
    let mut manifest = RunManifest::new(command, seed, config)?;
    let mut outputs = summarize(dir, &command.replace([' ', '-'], "_"), table, report)?;
    outputs.extend(extra);
    manifest.outputs = outputs.clone();
    let manifest_path = manifest.write(dir)?;
    for f in &failures {
        log::warn!("{command}: {f}");
    }
    emit(&Outcome {
        command,
        passed: failures.is_empty(),
        failures: &failures,
        manifest: manifest_path,
        outputs: &outputs,
        report,
    })?;
    Ok(if failures.is_empty() { 0 } else { EXIT_ASSERTION })
}

pub fn phase(args: &ExperimentArgs) -> CliResult<u8> {
    let cfg: PhaseConfig = args.config(None)?;
    args.out()?;
    let grid = run_phase_transition(&cfg)?;
    let mut failures = Vec::new();
    let mut ks = cfg.k_list.clone();
    ks.sort_unstable();
    ks.dedup();
    let mut last: Option<(usize, f64)> = None;
    for &k in &ks {
        let mut pts: Vec<(usize, f64)> = grid.row(k).iter().map(|c| (c.m, c.rate())).collect();
        pts.sort_by_key(|p| p.0);
        if !monotone_within_bands(&pts, cfg.trials) {
            failures.push(format!("k={k}: success rate decreases in m beyond the sampling band"));
        }
        if cfg.decoder == DecoderKind::BpEq && k <= cfg.d {
            if let Some(&(_, r)) = pts.iter().find(|p| p.0 == cfg.d) {
                if r < 1.0 {
                    failures.push(format!("k={k}: square system recovered at rate {r}"));
                }
            }
        }
        if let Some(m) = m50(&pts) {
            if let Some((pk, pm)) = last {
                if m < pm {
                    failures.push(format!("m50 drops from {pm} at k={pk} to {m} at k={k}"));
                }
            }
            last = Some((k, m));
        }
    }
    finish("phase", args, &cfg, &grid.table(), &grid, failures, Vec::new())
}

pub fn sweep(args: &ExperimentArgs) -> CliResult<u8> {
    let cfg: SweepConfig = args.config(None)?;
    let dir = args.out()?;
    let report = run_robustness_sweep(&cfg)?;
    let mut failures = Vec::new();
    let mut extra = Vec::new();
    if report.accepted() == 0 {
        failures.push("no matrix reached the RIP target within the draw budget".to_string());
    }
    if !report.violations.is_empty() {
        let path = dir.join("sweep_violations.json");
        write_json(&path, &report.violations)?;
        failures.push(format!("{} bound violations, replay dump at {}", report.violations.len(), path.display()));
        extra.push(path);
    }
    finish("sweep", args, &cfg, &report.table(), &report, failures, extra)
}

pub fn nsp_scaling(args: &ExperimentArgs) -> CliResult<u8> {
    let cfg: NspScalingConfig = args.config(Some(NspScalingConfig::default()))?;
    args.out()?;
    let report = run_lemma_nsp_scaling(&cfg)?;
    let mut failures = Vec::new();
    if !report.all_pass() {
        let bad: Vec<usize> = report.trials.iter().filter(|t| !t.pass).map(|t| t.trial).collect();
        failures.push(format!("{}/{} trials passed; failing trials {bad:?}", report.passed, report.trials.len()));
    }
    finish("counterexample nsp-scaling", args, &cfg, &report.table(), &report, failures, Vec::new())
}

pub fn f_rip(args: &ExperimentArgs) -> CliResult<u8> {
    let cfg: DripConfig = args.config(Some(DripConfig::default()))?;
    args.out()?;
    let report = run_theorem_dripbad_demo(&cfg)?;
    let mut failures = Vec::new();
    if !report.success {
        let stage = report.attempts.iter().map(|a| a.stage).max().unwrap_or(0);
        failures.push(format!("no attempt completed all stages (best stage {stage})"));
    } else if report.control_recovered != report.control_total {
        failures.push(format!("control recovered {}/{}", report.control_recovered, report.control_total));
    }
    finish("counterexample f-rip", args, &cfg, &report.table(), &report, failures, Vec::new())
}

pub fn smallball(args: &ExperimentArgs) -> CliResult<u8> {
    let cfg: SmallBallConfig = args.config(Some(SmallBallConfig::default()))?;
    args.out()?;
    let report = run_smallball_verification(&cfg)?;
    let mut failures = Vec::new();
    // one-sided: the sampled infimum can only overstate the left side
    if report.frequency < report.target - 0.02 {
        failures.push(format!("frequency {} below target {}", report.frequency, report.target));
    }
    finish("verify smallball", args, &cfg, &report.table(), &report, failures, Vec::new())
}
