//! Monte-Carlo experiments: phase transitions, bound sweeps, the two
//! counterexample pipelines and the small-ball check.
//!
//! Every randomized quantity comes from a per-trial substream of the master
//! seed, so results do not depend on thread count or scheduling.

mod counterexamples;
mod phase;
mod robustness;
mod smallball;
mod table;

pub use counterexamples::{
    run_lemma_nsp_scaling, run_theorem_dripbad_demo, DripConfig, DripReport, NspScalingConfig, NspScalingReport,
    NspScalingTrial,
};
pub use phase::{m50, monotone_within_bands, run_phase_transition, CellResult, GridResult, PhaseConfig};
pub use robustness::{profile_signal, run_robustness_sweep, Profile, SweepConfig, SweepReport, SweepRow};
pub use smallball::{run_smallball_verification, SmallBallConfig, SmallBallReport};
pub use table::{fmt_f64, summarize, Table};

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::decoders::{basis_pursuit_eq, l1_analysis, l1_synthesis, qcbp, DecodeResult};
use crate::error::Result;
use crate::frames::Frame;
use crate::numerics::{norm2, sub, DenseMatrix};
use crate::rng::TrialRng;

/// Decoder used by an experiment.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum DecoderKind {
    #[default]
    BpEq,
    Qcbp {
        eta: f64,
    },
    Synthesis {
        eta: f64,
    },
    Analysis {
        eta: f64,
    },
}

impl DecoderKind {
    pub fn decode(&self, frame: &Frame, a: &DenseMatrix, y: &[f64]) -> Result<DecodeResult> {
        match *self {
            DecoderKind::BpEq => basis_pursuit_eq(a, y),
            DecoderKind::Qcbp { eta } => qcbp(a, y, eta),
            DecoderKind::Synthesis { eta } => l1_synthesis(frame, a, y, eta),
            DecoderKind::Analysis { eta } => l1_analysis(frame, a, y, eta),
        }
    }
}

/// F-k-sparse signal: uniform support, Rademacher signs, unit ℓ₂ norm.
/// Returns `(coefficients, signal)`; `k = 0` gives zeros.
pub fn random_sparse_signal(frame: &Frame, k: usize, rng: &mut TrialRng) -> (Vec<f64>, Vec<f64>) {
    let n = frame.len();
    let mut x = vec![0.0; n];
    if k == 0 {
        return (x, vec![0.0; frame.dim()]);
    }
    for j in sample_indices(rng, n, k.min(n)) {
        x[j] = if rng.random::<bool>() { 1.0 } else { -1.0 };
    }
    let mut z = frame.synthesize(&x).expect("frame shape");
    let nz = norm2(&z);
    if nz > 0.0 {
        x.iter_mut().for_each(|v| *v /= nz);
        z.iter_mut().for_each(|v| *v /= nz);
    }
    (x, z)
}

/// `‖ẑ − z‖₂ / ‖z‖₂`, or the absolute error when `z = 0`.
pub fn relative_error(estimate: &[f64], truth: &[f64]) -> f64 {
    let e = norm2(&sub(estimate, truth));
    let n = norm2(truth);
    if n > 0.0 {
        e / n
    } else {
        e
    }
}
