use fsl_core::decoders::{error_bound, BoundParams, DecodeStatus};
use fsl_core::experiments::{
    m50, monotone_within_bands, run_lemma_nsp_scaling, run_phase_transition, run_robustness_sweep,
    run_smallball_verification, run_theorem_dripbad_demo, summarize, DecoderKind, DripConfig, GridResult,
    NspScalingConfig, NspScalingReport, PhaseConfig, Profile, SmallBallConfig, SweepConfig, SweepReport, Table,
};
use fsl_core::sensing::{Family, Normalization};

fn phase(d: usize, k_list: Vec<usize>, m_list: Vec<usize>, trials: usize, seed: u64) -> PhaseConfig {
    PhaseConfig {
        d,
        frame: None,
        ensemble: Family::Gaussian,
        normalization: Normalization::RowsByInvSqrtM,
        k_list,
        m_list,
        trials,
        success_threshold: 1e-4,
        seed,
        decoder: DecoderKind::BpEq,
    }
}

fn sweep(profile: Profile, eta_list: Vec<f64>) -> SweepConfig {
    SweepConfig {
        m: 32,
        d: 40,
        k: 1,
        ensemble: Family::Rademacher,
        matrices: 2,
        instances: 25,
        eta_list,
        profile,
        delta_target: 0.6,
        draw_budget: 5,
        seed: 3,
    }
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

#[test]
fn square_gaussian_and_zero_signals_always_succeed() {
    let g = run_phase_transition(&phase(12, vec![1, 4, 11], vec![12], 8, 1)).unwrap();
    assert!(g.cells.iter().all(|c| c.rate() == 1.0 && c.decoder_failures == 0));
    let g = run_phase_transition(&phase(16, vec![0], vec![1, 8], 5, 2)).unwrap();
    assert!(g.cells.iter().all(|c| c.rate() == 1.0 && c.max_rel_error == 0.0));
}

#[test]
fn phase_success_is_monotone_in_m() {
    let ms: Vec<usize> = (8..=40).step_by(8).collect();
    let g = run_phase_transition(&phase(64, vec![4], ms, 40, 7)).unwrap();
    let pts: Vec<(usize, f64)> = g.row(4).iter().map(|c| (c.m, c.rate())).collect();
    assert!(monotone_within_bands(&pts, 40), "{pts:?}");
    let m = m50(&pts).expect("rate crosses one half inside the grid");
    assert!((8.0..=40.0).contains(&m));
    assert!(g.cells.iter().all(|c| c.successes <= c.trials));
}

#[test]
fn phase_grid_serializes_losslessly() {
    let g = run_phase_transition(&phase(10, vec![1, 2], vec![4, 7], 6, 5)).unwrap();
    let back: GridResult = serde_json::from_str(&serde_json::to_string(&g).unwrap()).unwrap();
    assert_eq!(back, g);
    let t = g.table();
    assert_eq!(Table::from_csv(&t.to_csv().unwrap()).unwrap(), t);
}

#[test]
fn invalid_phase_configs_are_rejected() {
    assert!(run_phase_transition(&phase(8, vec![1], vec![9], 2, 0)).is_err());
    assert!(run_phase_transition(&phase(8, vec![1], vec![0], 2, 0)).is_err());
    assert!(run_phase_transition(&phase(8, vec![1], vec![4], 0, 0)).is_err());
    let bad = r#"{"d": 8, "k_list": [1], "m_list": [4], "trials": 2, "seed": 0, "typo": 1}"#;
    assert!(serde_json::from_str::<PhaseConfig>(bad).is_err());
}

#[test]
fn sparse_noiseless_sweep_recovers_exactly() {
    let r = run_robustness_sweep(&sweep(Profile::Sparse, vec![0.0])).unwrap();
    assert!(r.accepted() >= 1);
    assert!(!r.rows.is_empty());
    for row in &r.rows {
        assert_eq!(row.status, DecodeStatus::Optimal);
        assert!(row.observed <= 1e-8 && row.bound >= 0.0);
    }
    assert!(r.violations.is_empty());
}

#[test]
fn compressible_noisy_sweep_respects_the_bound() {
    let r = run_robustness_sweep(&sweep(Profile::PowerLaw { exponent: 1.0 }, vec![0.0, 0.05, 0.1])).unwrap();
    assert!(r.accepted() >= 1);
    assert!(r.violations.is_empty(), "{:?}", r.violations.first().map(|v| &v.row));
    assert!(r.rows.iter().all(|row| row.status == DecodeStatus::Optimal && row.observed <= row.bound));
    let accepted = r.matrices.iter().find(|m| m.accepted).unwrap();
    assert!(accepted.delta < 0.6);
    let params = BoundParams::RnspLp { rho: accepted.rho.unwrap(), tau: accepted.tau.unwrap(), k: 1, p: 2.0, q: 2.0 };
    let b1 = error_bound(&params, 0.0, 0.1).unwrap();
    let b2 = error_bound(&params, 0.0, 0.2).unwrap();
    assert!(b2 <= 2.0 * b1 * (1.0 + 1e-15));
}

#[test]
fn sweep_without_certifiable_matrices_reports_none() {
    let mut cfg = sweep(Profile::Sparse, vec![0.1]);
    cfg.delta_target = 1e-3;
    cfg.draw_budget = 2;
    let r = run_robustness_sweep(&cfg).unwrap();
    assert_eq!(r.accepted(), 0);
    assert!(r.rows.is_empty());
    assert!(r.matrices.iter().all(|m| m.draws == 2 && m.delta >= 1e-3));
}

#[test]
fn nsp_scaling_trials_all_pass() {
    let cfg = NspScalingConfig { trials: 12, ..Default::default() };
    let r = run_lemma_nsp_scaling(&cfg).unwrap();
    assert!(r.all_pass());
    for t in &r.trials {
        assert!(t.certified_b && t.control_holds && t.bd_fails && t.roundtrip_identical);
        assert!((t.gap - 1.0).abs() <= 1e-8);
        assert!(t.decode_rel_error > 1e-4);
    }
    let k2 = run_lemma_nsp_scaling(&NspScalingConfig { k: 2, d: 10, m: 8, trials: 4, ..Default::default() }).unwrap();
    assert!(k2.all_pass());
}

#[test]
fn drip_demo_completes_all_stages() {
    let r = run_theorem_dripbad_demo(&DripConfig::default()).unwrap();
    assert!(r.success);
    assert_eq!(r.attempts.last().unwrap().stage, 5);
    assert!(r.delta_before <= 0.3);
    assert!((r.delta_after - r.delta_before).abs() <= 1e-9);
    assert!(r.synthesis_rel_error > 0.1);
    assert_eq!(r.control_recovered, r.control_total);
    assert_eq!(r.control_total, 2 * 9);
    let b = r.construction.as_ref().unwrap();
    assert!(b.diagonal.iter().all(|&x| x > 0.0));
}

#[test]
fn drip_demo_rejects_bad_shapes() {
    assert!(run_theorem_dripbad_demo(&DripConfig { m: 6, ..Default::default() }).is_err());
    assert!(run_theorem_dripbad_demo(&DripConfig { n: 5, ..Default::default() }).is_err());
}

#[test]
fn smallball_with_large_t_holds_everywhere() {
    let cfg = SmallBallConfig { t: 50.0, repetitions: 40, q_trials: 2000, w_trials: 300, ..Default::default() };
    let r = run_smallball_verification(&cfg).unwrap();
    assert!(r.rhs <= 0.0);
    assert_eq!(r.holds, r.repetitions);
    assert_eq!(r.frequency, 1.0);
}

#[test]
fn smallball_with_zero_ensemble_holds_everywhere() {
    let cfg =
        SmallBallConfig { ensemble: Family::Zero, repetitions: 20, q_trials: 500, w_trials: 100, ..Default::default() };
    let r = run_smallball_verification(&cfg).unwrap();
    assert_eq!(r.q_hat, 0.0);
    assert!(r.lhs.iter().all(|&l| l == 0.0));
    assert!((r.rhs + cfg.u * cfg.t).abs() < 1e-12);
    assert_eq!(r.holds, r.repetitions);
}

#[test]
fn smallball_default_frequency_is_near_target() {
    let cfg = SmallBallConfig { repetitions: 100, ..Default::default() };
    let r = run_smallball_verification(&cfg).unwrap();
    assert!((r.target - (1.0 - (-2.0f64).exp())).abs() < 1e-15);
    assert!(r.frequency >= 0.75, "frequency {}", r.frequency);
}

#[test]
fn summarize_round_trips_three_reports() {
    let dir = tempfile::tempdir().unwrap();
    let grid = run_phase_transition(&phase(10, vec![1, 2], vec![5, 10], 4, 9)).unwrap();
    let sw = run_robustness_sweep(&SweepConfig { instances: 4, matrices: 1, ..sweep(Profile::Sparse, vec![0.0, 0.1]) })
        .unwrap();
    let ns = run_lemma_nsp_scaling(&NspScalingConfig { trials: 3, ..Default::default() }).unwrap();

    let files = summarize(dir.path(), "phase", &grid.table(), &grid).unwrap();
    assert_eq!(files.len(), 2);
    let csv = Table::from_csv(&std::fs::read_to_string(&files[0]).unwrap()).unwrap();
    assert_eq!(csv, grid.table());
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&files[1]).unwrap()).unwrap();
    assert!(json.get("schema").is_some());

    let files = summarize(dir.path(), "sweep", &sw.table(), &sw).unwrap();
    let csv = Table::from_csv(&std::fs::read_to_string(&files[0]).unwrap()).unwrap();
    assert_eq!(csv.column_f64("observed").unwrap(), sw.rows.iter().map(|r| r.observed).collect::<Vec<_>>());

    let files = summarize(dir.path(), "nsp_scaling", &ns.table(), &ns).unwrap();
    let csv = Table::from_csv(&std::fs::read_to_string(&files[0]).unwrap()).unwrap();
    assert_eq!(csv.column_f64("gap").unwrap(), ns.trials.iter().map(|t| t.gap).collect::<Vec<_>>());

    // a regular file where the directory should be
    assert!(summarize(&files[0], "x", &grid.table(), &grid).is_err());
    // the reports themselves survive a JSON round trip
    let _: SweepReport = serde_json::from_str(&serde_json::to_string(&sw).unwrap()).unwrap();
    let back: NspScalingReport = serde_json::from_str(&serde_json::to_string(&ns).unwrap()).unwrap();
    assert_eq!(back, ns);
}

#[test]
fn csv_output_is_independent_of_thread_count() {
    let run = || {
        let g = run_phase_transition(&phase(16, vec![1, 3], vec![6, 10], 6, 11)).unwrap().table().to_csv().unwrap();
        let s = run_robustness_sweep(&SweepConfig { instances: 6, matrices: 1, ..sweep(Profile::Sparse, vec![0.1]) })
            .unwrap()
            .table()
            .to_csv()
            .unwrap();
        let n = run_lemma_nsp_scaling(&NspScalingConfig { trials: 4, ..Default::default() })
            .unwrap()
            .table()
            .to_csv()
            .unwrap();
        (g, s, n)
    };
    assert_eq!(in_pool(1, run), in_pool(4, run));
}
