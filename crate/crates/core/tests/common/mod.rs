//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use std::f64::consts::PI;

type CMatrix = Array2<Complex64>;

fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    Array2::from_shape_fn((ar * br, ac * bc), |(i, j)| a[[i / br, j / bc]] * b[[i % br, j % bc]])
}

fn hadamard_all(n: usize) -> CMatrix {
    let s = Complex64::new(1.0 / 2f64.sqrt(), 0.0);
    let h = Array2::from_shape_vec((2, 2), vec![s, s, s, -s]).unwrap();
    let mut m = Array2::from_elem((1, 1), Complex64::new(1.0, 0.0));
    for _ in 0..n {
        m = kron(&m, &h);
    }
    m
}

/// Dense unitary of the ZZ feature map, built from its closed form: each
/// repetition is `D(x) · H^{⊗n}` with `D` diagonal,
/// `D_bb = exp(i [Σ_k 2 x_k b_k + Σ_{k<l} 2 (π - x_k)(π - x_l) (b_k ⊕ b_l)])`,
/// where `b_k` is bit `k` of the basis index.
pub fn dense_feature_unitary(x: &[f64], reps: usize) -> CMatrix {
    let n = x.len();
    let dim = 1 << n;
    let phase: Array1<Complex64> = (0..dim)
        .map(|b| {
            let bit = |k: usize| ((b >> k) & 1) as f64;
            let mut theta = 0.0;
            for k in 0..n {
                theta += 2.0 * x[k] * bit(k);
                for l in (k + 1)..n {
                    let parity = ((b >> k) ^ (b >> l)) & 1;
                    theta += 2.0 * (PI - x[k]) * (PI - x[l]) * parity as f64;
                }
            }
            Complex64::from_polar(1.0, theta)
        })
        .collect();
    let h = hadamard_all(n);
    let layer = Array2::from_shape_fn((dim, dim), |(i, j)| phase[i] * h[[i, j]]);
    let mut u = Array2::from_shape_fn((dim, dim), |(i, j)| Complex64::new((i == j) as u8 as f64, 0.0));
    for _ in 0..reps {
        u = layer.dot(&u);
    }
    u
}

/// All-zeros probability of `U(x')† U(x) |0⟩` by dense matrix products.
pub fn dense_compute_uncompute(x: &[f64], xp: &[f64], reps: usize) -> f64 {
    let u = dense_feature_unitary(x, reps);
    let v = dense_feature_unitary(xp, reps);
    let vdag = v.t().mapv(|z| z.conj());
    vdag.dot(&u)[[0, 0]].norm_sqr()
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
fn solve(mut a: Array2<f64>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[[i, col]].abs().total_cmp(&a[[j, col]].abs()))?;
        if a[[piv, col]].abs() < 1e-12 {
            return None;
        }
        if piv != col {
            for k in 0..n {
                a.swap([piv, k], [col, k]);
            }
            b.swap(piv, col);
        }
        for r in (col + 1)..n {
            let f = a[[r, col]] / a[[col, col]];
            for k in col..n {
                a[[r, k]] -= f * a[[col, k]];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = ((r + 1)..n).map(|k| a[[r, k]] * x[k]).sum();
        x[r] = (b[r] - s) / a[[r, r]];
    }
    Some(x)
}

/// Exact maximum of the SVM dual `Σα - ½ αᵀQα`, `0 ≤ α ≤ C`, `yᵀα = 0`, by
/// enumerating every assignment of each `α_i` to lower bound, upper bound or
/// free, solving the equality-constrained stationarity system on the free
/// set, and keeping the best feasible candidate. Returns `(objective, α)`.
pub fn exhaustive_dual(k: &Array2<f64>, y: &[f64], c: f64) -> (f64, Vec<f64>) {
    let n = y.len();
    let q = Array2::from_shape_fn((n, n), |(i, j)| y[i] * y[j] * k[[i, j]]);
    let objective = |a: &[f64]| {
        let av = Array1::from(a.to_vec());
        av.sum() - 0.5 * av.dot(&q.dot(&av))
    };
    let mut best = (f64::NEG_INFINITY, vec![0.0; n]);
    let cases = 3usize.pow(n as u32);
    for code in 0..cases {
        let mut state = vec![0u8; n];
        let mut rest = code;
        for s in state.iter_mut() {
            *s = (rest % 3) as u8;
            rest /= 3;
        }
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
        let mut alpha: Vec<f64> = state.iter().map(|&s| if s == 1 { c } else { 0.0 }).collect();
        if free.is_empty() {
            let balance: f64 = alpha.iter().zip(y).map(|(a, y)| a * y).sum();
            if balance.abs() > 1e-9 {
                continue;
            }
        } else {
            let m = free.len();
            let mut a = Array2::zeros((m + 1, m + 1));
            let mut rhs = vec![0.0; m + 1];
            for (r, &i) in free.iter().enumerate() {
                for (s, &j) in free.iter().enumerate() {
                    a[[r, s]] = q[[i, j]];
                }
                a[[r, m]] = y[i];
                a[[m, r]] = y[i];
                let fixed: f64 = (0..n).filter(|&j| state[j] == 1).map(|j| q[[i, j]] * c).sum();
                rhs[r] = 1.0 - fixed;
            }
            rhs[m] = -(0..n).filter(|&j| state[j] == 1).map(|j| y[j] * c).sum::<f64>();
            let Some(sol) = solve(a, rhs) else { continue };
            if sol[..m].iter().any(|&v| v < -1e-9 || v > c + 1e-9) {
                continue;
            }
            for (r, &i) in free.iter().enumerate() {
                alpha[i] = sol[r].clamp(0.0, c);
            }
        }
        let f = objective(&alpha);
        if f > best.0 {
            best = (f, alpha);
        }
    }
    best
}

/// Whether `a + shift·I` admits a Cholesky factorization, i.e. every
/// eigenvalue of the symmetric matrix `a` exceeds `-shift`.
pub fn cholesky_psd(a: &Array2<f64>, shift: f64) -> bool {
    let n = a.nrows();
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[[i, k]] * l[[j, k]]).sum();
            if i == j {
                let d = a[[i, i]] + shift - s;
                if d <= 0.0 {
                    return false;
                }
                l[[i, i]] = d.sqrt();
            } else {
                l[[i, j]] = (a[[i, j]] - s) / l[[j, j]];
            }
        }
    }
    true
}
