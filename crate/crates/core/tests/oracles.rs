mod common;

use common::{dense_compute_uncompute, dense_feature_unitary, exhaustive_dual};
use ndarray::{arr2, Array2};
use qradar::qkernel::{feature_state, kernel_exact};
use qradar::rng;
use qradar::svm::{rbf_gram, train_binary, DEFAULT_TOL};
use rand::Rng;
use std::f64::consts::PI;

#[test]
fn dense_unitary_is_unitary() {
    let u = dense_feature_unitary(&[0.4, 2.1, 1.3], 2);
    let prod = u.t().mapv(|z| z.conj()).dot(&u);
    for ((i, j), z) in prod.indexed_iter() {
        let target = if i == j { 1.0 } else { 0.0 };
        assert!((z.re - target).abs() < 1e-12 && z.im.abs() < 1e-12);
    }
}

#[test]
fn statevector_matches_dense_first_column_up_to_global_phase() {
    let mut r = rng::stream(11);
    for n in 2..=4 {
        for reps in 1..=3 {
            let x: Vec<f64> = (0..n).map(|_| r.random_range(0.0..PI)).collect();
            let psi = feature_state(&x, reps).unwrap();
            let u = dense_feature_unitary(&x, reps);
            let overlap: num_complex::Complex64 = psi
                .amplitudes()
                .iter()
                .enumerate()
                .map(|(i, a)| u[[i, 0]].conj() * a)
                .sum();
            assert!((overlap.norm() - 1.0).abs() < 1e-12, "n={n} reps={reps}");
        }
    }
}

#[test]
fn kernel_matches_dense_oracle_for_other_repetition_counts() {
    let mut r = rng::stream(12);
    for reps in [1, 3] {
        for _ in 0..10 {
            let x: Vec<f64> = (0..3).map(|_| r.random_range(0.0..PI)).collect();
            let y: Vec<f64> = (0..3).map(|_| r.random_range(0.0..PI)).collect();
            let a = kernel_exact(&x, &y, reps).unwrap();
            assert!((a - dense_compute_uncompute(&x, &y, reps)).abs() < 1e-10);
        }
    }
}

#[test]
fn exhaustive_dual_reproduces_two_point_closed_form() {
    // Linear kernel on x = ±1: α = 1/2 on both, objective 1/2.
    let k = arr2(&[[1.0, -1.0], [-1.0, 1.0]]);
    let (obj, alpha) = exhaustive_dual(&k, &[1.0, -1.0], 10.0);
    assert!((obj - 0.5).abs() < 1e-12);
    assert!(alpha.iter().all(|a| (a - 0.5).abs() < 1e-12));
}

#[test]
fn exhaustive_dual_respects_box_when_c_binds() {
    let k = arr2(&[[1.0, -1.0], [-1.0, 1.0]]);
    let (obj, alpha) = exhaustive_dual(&k, &[1.0, -1.0], 0.2);
    assert_eq!(alpha, vec![0.2, 0.2]);
    assert!((obj - (0.4 - 0.5 * 0.16)).abs() < 1e-12);
}

fn random_problem(seed: u64, n: usize) -> (Array2<f64>, Vec<f64>) {
    let mut r = rng::stream(seed);
    let x = Array2::from_shape_fn((n, 2), |_| r.random_range(-2.0..2.0));
    let mut y: Vec<f64> = (0..n).map(|_| if r.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
    y[0] = 1.0;
    y[1] = -1.0;
    (rbf_gram(&x, 1.0), y)
}

#[test]
fn smo_matches_exhaustive_dual_across_regularization() {
    for (seed, c) in (100..110).zip([0.1, 0.5, 1.0, 2.0, 10.0].iter().cycle()) {
        let (k, y) = random_problem(seed, 7);
        let (best, _) = exhaustive_dual(&k, &y, *c);
        let sol = train_binary(&k, &y, *c, DEFAULT_TOL, 1_000_000).unwrap();
        let got = sol.dual_objective(&k, &y);
        assert!(got <= best + 1e-9, "seed {seed}: smo {got} above optimum {best}");
        assert!(best - got < 1e-4, "seed {seed}: smo {got} vs optimum {best}");
        assert!(sol.kkt_violation(&k, &y, *c) <= DEFAULT_TOL);
    }
}
