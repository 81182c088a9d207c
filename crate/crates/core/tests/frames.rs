mod common;

use common::{combinations, determinant};
use fsl_core::frames::{
    f_norm, is_full_spark, make_frame, scale_columns, sigma_f_k, sigma_f_k_with_cap, splittability_search,
    splitting_terms, Frame, FrameSpec, FullSpark,
};
use fsl_core::numerics::{norm1, norm2, svd};
use fsl_core::tolerances::ENUMERATION_CAP;
use fsl_core::{DenseMatrix, Error};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn frame(rows: &[&[f64]]) -> Frame {
    Frame::new(DenseMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()).unwrap()
}

fn dct4() -> Frame {
    make_frame(&FrameSpec::DctOvercomplete { d: 4 }).unwrap()
}

fn randn(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(rand_distr::StandardNormal)).collect()
}

#[test]
fn identity_frame() {
    let f = make_frame(&FrameSpec::Identity { d: 3 }).unwrap();
    assert_eq!(f.matrix(), &DenseMatrix::identity(3));
    let (lo, hi) = f.frame_bounds();
    assert!((lo - 1.0).abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);
    assert!(f.is_parseval());
}

#[test]
fn dct_overcomplete_is_tight_with_bound_two() {
    let f = dct4();
    assert_eq!((f.dim(), f.len()), (4, 8));
    let (lo, hi) = f.frame_bounds();
    assert!((lo - 2.0).abs() < 1e-12 && (hi - 2.0).abs() < 1e-12);
    assert!(!f.is_parseval());
    let s = f.matrix().matmul(&f.matrix().transpose()).unwrap();
    assert!(s.sub(&DenseMatrix::identity(4).scaled(2.0)).unwrap().max_abs() < 1e-12);
}

#[test]
fn gaussian_frame_has_full_rank_and_unit_columns() {
    let f = make_frame(&FrameSpec::Gaussian { d: 4, n: 8, seed: 9, unit_norm_columns: true }).unwrap();
    assert_eq!(svd(f.matrix()).unwrap().rank, 4);
    for j in 0..8 {
        assert!((norm2(&f.matrix().column(j)) - 1.0).abs() < 1e-12);
    }
    let again = make_frame(&FrameSpec::Gaussian { d: 4, n: 8, seed: 9, unit_norm_columns: true }).unwrap();
    assert_eq!(f.matrix(), again.matrix());
}

#[test]
fn rank_deficient_input_is_not_a_frame() {
    let m = DenseMatrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![2.0, 4.0, 6.0]]).unwrap();
    assert!(matches!(Frame::new(m), Err(Error::NotAFrame(_))));
}

#[test]
fn scale_columns_cases() {
    let f = dct4();
    assert_eq!(scale_columns(&f, &[1.0; 8]).unwrap().matrix(), f.matrix());
    let g = scale_columns(&frame(&[&[1.0, 0.0], &[0.0, 1.0]]), &[2.0, 3.0]).unwrap();
    assert_eq!(g.matrix(), &DenseMatrix::from_diag(&[2.0, 3.0]));
    assert!(scale_columns(&f, &[1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]).is_err());
}

#[test]
fn scaling_preserves_full_spark_status() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for trial in 0..20 {
        let mut m = DenseMatrix::from_fn(3, 5, |_, _| rng.random_range(-1.0..1.0));
        if trial % 2 == 1 {
            // force a dependent triple
            for i in 0..3 {
                m[(i, 4)] = m[(i, 0)] - 2.0 * m[(i, 1)];
            }
        }
        let f = Frame::new(m).unwrap();
        let d: Vec<f64> =
            (0..5).map(|_| rng.random_range(0.2..3.0) * if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
        let g = scale_columns(&f, &d).unwrap();
        for t in combinations(5, 3) {
            let sub = |fr: &Frame| (0..3).map(|i| t.iter().map(|&j| fr.matrix()[(i, j)]).collect()).collect();
            let prod: f64 = t.iter().map(|&j| d[j]).product();
            let (a, b) = (determinant(sub(&f)), determinant(sub(&g)));
            assert!((b - prod * a).abs() <= 1e-10 * (1.0 + b.abs()));
        }
        let fs = is_full_spark(&f, ENUMERATION_CAP);
        assert_eq!(matches!(fs, FullSpark::Yes), trial % 2 == 0);
        assert_eq!(matches!(fs, FullSpark::Yes), matches!(is_full_spark(&g, ENUMERATION_CAP), FullSpark::Yes));
    }
}

#[test]
fn full_spark_cases() {
    assert_eq!(*make_frame(&FrameSpec::Identity { d: 3 }).unwrap().full_spark(), FullSpark::Yes);
    let rep = frame(&[&[1.0, 0.0, 1.0], &[0.0, 1.0, 0.0]]);
    assert_eq!(*rep.full_spark(), FullSpark::No { witness: vec![0, 2] });

    let f = dct4();
    let oracle = combinations(8, 4).into_iter().all(|t| {
        let sub = (0..4).map(|i| t.iter().map(|&j| f.matrix()[(i, j)]).collect()).collect();
        determinant(sub).abs() > 1e-10
    });
    assert_eq!(matches!(f.full_spark(), FullSpark::Yes), oracle);
    match f.full_spark() {
        FullSpark::No { witness } => {
            let sub = (0..4).map(|i| witness.iter().map(|&j| f.matrix()[(i, j)]).collect()).collect();
            assert!(determinant(sub).abs() < 1e-9);
        }
        FullSpark::Yes => {}
        other => panic!("unexpected {other:?}"),
    }
    assert!(matches!(is_full_spark(&f, 10), FullSpark::NotChecked { .. }));
}

#[test]
fn f_norm_cases() {
    let id = make_frame(&FrameSpec::Identity { d: 3 }).unwrap();
    let z = [1.5, -2.0, 0.25];
    assert!((f_norm(&id, &z).unwrap().value - norm1(&z)).abs() < 1e-12);

    let f = frame(&[&[1.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
    let r = f_norm(&f, &[1.0, 1.0]).unwrap();
    assert!((r.value - 2.0).abs() < 1e-12);
    let synth = f.synthesize(&r.coefficients).unwrap();
    assert!((synth[0] - 1.0).abs() < 1e-8 && (synth[1] - 1.0).abs() < 1e-8);
    // vertex oracle on the split program
    let split = f.matrix().hstack(&f.matrix().scaled(-1.0)).unwrap();
    assert!((common::vertex_lp(&[1.0; 6], &split, &[1.0, 1.0]).unwrap() - 2.0).abs() < 1e-12);

    let zero = f_norm(&f, &[0.0, 0.0]).unwrap();
    assert_eq!(zero.value, 0.0);
    assert!(zero.coefficients.iter().all(|&v| v == 0.0));
}

#[test]
fn sigma_cases() {
    let f = dct4();
    let mut x = vec![0.0; 8];
    x[5] = -1.3;
    let z = f.synthesize(&x).unwrap();
    let a = sigma_f_k(&f, &z, 1).unwrap();
    assert!(a.tail < 1e-9);
    assert!(norm2(&fsl_core::numerics::sub(&a.best_approx, &z)) < 1e-8);

    let id = make_frame(&FrameSpec::Identity { d: 3 }).unwrap();
    let a = sigma_f_k(&id, &[3.0, 2.0, 1.0], 2).unwrap();
    assert!((a.tail - 1.0).abs() < 1e-12);
    assert_eq!(a.support, vec![0, 1]);
    assert!(
        (a.best_approx[0] - 3.0).abs() < 1e-12 && (a.best_approx[1] - 2.0).abs() < 1e-12 && a.best_approx[2] == 0.0
    );

    assert!(matches!(sigma_f_k_with_cap(&f, &z, 3, 10), Err(Error::EnumerationCap { .. })));
}

/// `min_t ‖z − t f_j‖_F` by golden-section search, then minimized over `j`.
fn sigma1_by_line_search(f: &Frame, z: &[f64]) -> f64 {
    let mut best = f64::INFINITY;
    for j in 0..f.len() {
        let fj = f.matrix().column(j);
        let g = |t: f64| f_norm(f, &z.iter().zip(&fj).map(|(a, b)| a - t * b).collect::<Vec<_>>()).unwrap().value;
        let (mut lo, mut hi) = (-20.0, 20.0);
        let r = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..120 {
            let (a, b) = (hi - r * (hi - lo), lo + r * (hi - lo));
            if g(a) < g(b) {
                hi = b;
            } else {
                lo = a;
            }
        }
        best = best.min(g(0.5 * (lo + hi)));
    }
    best
}

#[test]
fn sigma_matches_line_search_on_dct() {
    let f = dct4();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        let z = randn(&mut rng, 4);
        let a = sigma_f_k(&f, &z, 1).unwrap();
        let oracle = sigma1_by_line_search(&f, &z);
        assert!((a.tail - oracle).abs() < 1e-6 * (1.0 + oracle), "{} vs {oracle}", a.tail);
        let resid = fsl_core::numerics::sub(&z, &a.best_approx);
        assert!((f_norm(&f, &resid).unwrap().value - a.tail).abs() < 1e-7);
    }
}

#[test]
fn identity_frame_is_one_splittable() {
    let id = make_frame(&FrameSpec::Identity { d: 5 }).unwrap();
    let e = splittability_search(&id, 2, 1000, 1).unwrap();
    assert!(e.beta_upper >= 1.0 - 1e-6, "{}", e.beta_upper);
    assert_eq!(e.beta_free_violations, 0);
}

#[test]
fn zero_pair_is_never_a_witness() {
    let f = dct4();
    let (slack, gap) = splitting_terms(&f, &[0.0; 4], &[0.0; 4], 1).unwrap();
    assert_eq!((slack, gap), (0.0, 0.0));
}

#[test]
fn dct_splittability_witness_substitutes() {
    let f = dct4();
    let e = splittability_search(&f, 1, 200, 4).unwrap();
    assert!(e.beta_upper.is_finite());
    let (x, y) = e.witness.clone().unwrap();
    let (slack, gap) = splitting_terms(&f, &x, &y, 1).unwrap();
    assert!(gap > 0.0);
    assert!((slack / gap - e.beta_upper).abs() < 1e-9 * (1.0 + e.beta_upper.abs()));
    // any larger β is violated by the witness
    let beta = e.beta_upper + 1e-3;
    assert!(slack < beta * gap);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn f_norm_is_a_norm(seed in any::<u64>(), c in -5.0f64..5.0) {
        let f = dct4();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, y) = (randn(&mut rng, 4), randn(&mut rng, 4));
        let nx = f_norm(&f, &x).unwrap().value;
        let ny = f_norm(&f, &y).unwrap().value;
        let cx: Vec<f64> = x.iter().map(|v| c * v).collect();
        prop_assert!((f_norm(&f, &cx).unwrap().value - c.abs() * nx).abs() <= 1e-8 * (1.0 + c.abs() * nx));
        let sum = fsl_core::numerics::add(&x, &y);
        prop_assert!(f_norm(&f, &sum).unwrap().value <= nx + ny + 1e-9);
        prop_assert!(nx >= norm2(&x) / f.spectral_norm() - 1e-9);
    }

    #[test]
    fn parseval_analysis_is_isometric(seed in any::<u64>()) {
        let f = dct4();
        let p = Frame::new(f.matrix().scaled(std::f64::consts::FRAC_1_SQRT_2)).unwrap();
        prop_assert!(p.is_parseval());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = randn(&mut rng, 4);
        prop_assert!((norm2(&p.analyze(&z).unwrap()) - norm2(&z)).abs() <= 1e-9 * (1.0 + norm2(&z)));
    }

    #[test]
    fn sigma_nonincreasing_in_k(seed in any::<u64>()) {
        let f = make_frame(&FrameSpec::Gaussian { d: 3, n: 6, seed, unit_norm_columns: true }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = randn(&mut rng, 3);
        let tails: Vec<f64> = (0..=6).map(|k| sigma_f_k(&f, &z, k).unwrap().tail).collect();
        prop_assert!(tails.windows(2).all(|w| w[1] <= w[0] + 1e-9));
        prop_assert!(tails[6] <= 1e-9);
        prop_assert!((tails[0] - f_norm(&f, &z).unwrap().value).abs() <= 1e-8);
    }

    #[test]
    fn scaling_keeps_sparse_membership(seed in any::<u64>(), j in 0usize..8, c in 0.1f64..4.0) {
        let f = dct4();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d: Vec<f64> = (0..8).map(|_| rng.random_range(0.2..5.0)).collect();
        let g = scale_columns(&f, &d).unwrap();
        let mut x = vec![0.0; 8];
        x[j] = c;
        let z = f.synthesize(&x).unwrap();
        prop_assert!(sigma_f_k(&g, &z, 1).unwrap().tail <= 1e-9 * (1.0 + c));
    }
}
