//! Workbench for recovering signals that are sparse with respect to a frame.
//!
//! The crate bundles the pieces needed to study l1 decoders for compressed
//! sensing with redundant dictionaries:
//!
//! * [`numerics`]: dense matrices, Jacobi SVD/eigen solvers, a Bland-rule
//!   simplex LP solver and proximal building blocks.
//! * [`frames`]: frame construction and diagnostics, the frame norm
//!   `‖z‖_F`, best F-k-term approximation and splittability search.
//! * [`sensing`]: seeded random measurement ensembles and Monte-Carlo
//!   estimators for small-ball probabilities, empirical widths and moments.
//! * [`properties`]: certified and estimated checks of NSP, RIP, coherence,
//!   quotient and robust width properties and their frame counterparts.
//! * [`decoders`]: basis pursuit, QCBP, l1-synthesis and l1-analysis
//!   decoders plus closed-form recovery error bounds.
//! * [`experiments`]: deterministic Monte-Carlo pipelines (phase
//!   transitions, bound sweeps, counterexamples, small-ball checks).
//!
//! Randomized work is seeded per trial so that results do not depend on the
//! number of worker threads. With the default `parallel` feature the inner
//! loops run on rayon; without it they run sequentially.

pub mod combinatorics;
pub mod decoders;
pub mod error;
pub mod experiments;
pub mod frames;
pub mod io;
pub mod numerics;
pub mod par;
pub mod properties;
pub mod rng;
pub mod sensing;
pub mod tolerances;

pub use error::{Error, Result};
pub use numerics::{DenseMatrix, Vector};

/// Version tag written into every JSON document this crate emits.
pub const SCHEMA_VERSION: u32 = 1;
