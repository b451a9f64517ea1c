use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::circuit::{Circuit, Gate, MAX_QUBITS};
use super::NoiseModel;
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Applies `gate` to the logical vector `buf[offset + k * stride]`, `k < 2^n`.
fn apply_strided(buf: &mut [Complex64], offset: usize, stride: usize, dim: usize, gate: &Gate) {
    let at = |k: usize| offset + k * stride;
    match *gate {
        Gate::H(q) => {
            let m = 1 << q;
            for k in (0..dim).filter(|k| k & m == 0) {
                let (i, j) = (at(k), at(k | m));
                let (a, b) = (buf[i], buf[j]);
                buf[i] = (a + b) * FRAC_1_SQRT_2;
                buf[j] = (a - b) * FRAC_1_SQRT_2;
            }
        }
        Gate::P(theta, q) => {
            let m = 1 << q;
            let ph = Complex64::from_polar(1.0, theta);
            for k in (0..dim).filter(|k| k & m != 0) {
                buf[at(k)] *= ph;
            }
        }
        Gate::Rz(theta, q) => {
            let m = 1 << q;
            let lo = Complex64::from_polar(1.0, -theta / 2.0);
            let hi = Complex64::from_polar(1.0, theta / 2.0);
            for k in 0..dim {
                buf[at(k)] *= if k & m == 0 { lo } else { hi };
            }
        }
        Gate::Cx(c, t) => {
            let (mc, mt) = (1 << c, 1 << t);
            for k in (0..dim).filter(|k| k & mc != 0 && k & mt == 0) {
                buf.swap(at(k), at(k | mt));
            }
        }
    }
}

/// Pure state of `n` qubits. Qubit `q` is bit `q` of the amplitude index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Statevector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl Statevector {
    /// `|0…0⟩`.
    pub fn zero(n_qubits: usize) -> Self {
        let mut amplitudes = vec![ZERO; 1 << n_qubits];
        amplitudes[0] = ONE;
        Statevector {
            n_qubits,
            amplitudes,
        }
    }

    /// Computational basis state `|index⟩`.
    pub fn basis(n_qubits: usize, index: usize) -> Self {
        let mut s = Self::zero(n_qubits);
        s.amplitudes[0] = ZERO;
        s.amplitudes[index] = ONE;
        s
    }

    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let dim = amplitudes.len();
        if dim < 2 || !dim.is_power_of_two() {
            return Err(Error::invalid("amplitudes", format!("length {dim} is not a power of two")));
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::invalid("amplitudes", format!("norm² {norm} is not 1")));
        }
        Ok(Statevector {
            n_qubits: dim.trailing_zeros() as usize,
            amplitudes,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Statevector) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn apply_gate(&mut self, gate: &Gate) {
        let dim = self.amplitudes.len();
        apply_strided(&mut self.amplitudes, 0, 1, dim, gate);
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }
}

/// Applies `circuit` to `state`, gate by gate, without forming matrices.
pub fn apply(circuit: &Circuit, state: &Statevector) -> Result<Statevector> {
    if circuit.n_qubits() != state.n_qubits {
        return Err(Error::DimensionMismatch {
            expected: 1 << circuit.n_qubits(),
            actual: state.amplitudes.len(),
        });
    }
    let mut out = state.clone();
    for g in circuit.gates() {
        out.apply_gate(g);
    }
    Ok(out)
}

/// `U |0…0⟩`.
pub fn run(circuit: &Circuit) -> Statevector {
    apply(circuit, &Statevector::zero(circuit.n_qubits())).expect("widths match by construction")
}

/// Mixed state, row-major `2^n × 2^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrix {
    n_qubits: usize,
    entries: Vec<Complex64>,
}

impl DensityMatrix {
    pub fn zero(n_qubits: usize) -> Result<Self> {
        if n_qubits > MAX_QUBITS {
            return Err(Error::QubitCap {
                requested: n_qubits,
                cap: MAX_QUBITS,
            });
        }
        let dim = 1 << n_qubits;
        let mut entries = vec![ZERO; dim * dim];
        entries[0] = ONE;
        Ok(DensityMatrix { n_qubits, entries })
    }

    pub fn from_statevector(psi: &Statevector) -> Result<Self> {
        if psi.n_qubits > MAX_QUBITS {
            return Err(Error::QubitCap {
                requested: psi.n_qubits,
                cap: MAX_QUBITS,
            });
        }
        let a = &psi.amplitudes;
        let dim = a.len();
        let mut entries = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                entries.push(a[i] * a[j].conj());
            }
        }
        Ok(DensityMatrix {
            n_qubits: psi.n_qubits,
            entries,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.entries[i * self.dim() + j]
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim()).map(|i| self.get(i, i)).sum()
    }

    /// Largest `|ρ_ij - conj(ρ_ji)|`.
    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in i..d {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    /// `⟨ψ|ρ|ψ⟩`.
    pub fn fidelity_with(&self, psi: &Statevector) -> f64 {
        let d = self.dim();
        let a = &psi.amplitudes;
        let mut acc = ZERO;
        for i in 0..d {
            for j in 0..d {
                acc += a[i].conj() * self.get(i, j) * a[j];
            }
        }
        acc.re
    }

    /// Real symmetric embedding of the Hermitian matrix; its eigenvalues are
    /// those of `ρ`, each doubled in multiplicity.
    pub fn real_embedding(&self) -> ndarray::Array2<f64> {
        let d = self.dim();
        ndarray::Array2::from_shape_fn((2 * d, 2 * d), |(r, c)| {
            let z = self.get(r % d, c % d);
            match (r < d, c < d) {
                (true, true) | (false, false) => z.re,
                (true, false) => -z.im,
                (false, true) => z.im,
            }
        })
    }

    /// `U ρ U†` for one gate.
    pub fn apply_gate(&mut self, gate: &Gate) {
        let d = self.dim();
        for col in 0..d {
            apply_strided(&mut self.entries, col, d, d, gate);
        }
        let conj = gate.conjugate();
        for row in 0..d {
            apply_strided(&mut self.entries, row * d, 1, d, &conj);
        }
    }

    /// `ρ → (1-p) ρ + p (I/2^k ⊗ Tr_S ρ)` on the qubits in `support`.
    pub fn depolarize(&mut self, support: &[usize], p: f64) {
        if p == 0.0 {
            return;
        }
        let d = self.dim();
        let mask: usize = support.iter().map(|q| 1usize << q).sum();
        let sub_dim = 1usize << support.len();
        let scale = p / sub_dim as f64;
        // all index patterns on the support qubits
        let patterns: Vec<usize> = (0..sub_dim)
            .map(|s| {
                support
                    .iter()
                    .enumerate()
                    .filter(|(b, _)| s >> b & 1 == 1)
                    .map(|(_, q)| 1usize << q)
                    .sum()
            })
            .collect();
        let old = self.entries.clone();
        for i in 0..d {
            for j in 0..d {
                let mut v = old[i * d + j] * (1.0 - p);
                if i & mask == j & mask {
                    let (ri, rj) = (i & !mask, j & !mask);
                    let reduced: Complex64 = patterns.iter().map(|s| old[(ri | s) * d + (rj | s)]).sum();
                    v += reduced * scale;
                }
                self.entries[i * d + j] = v;
            }
        }
    }

    pub fn probabilities(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.get(i, i).re.max(0.0)).collect()
    }
}

/// Runs `circuit` from `|0…0⟩` as a density matrix with a depolarizing
/// channel after every gate (`p1` or `p2` by gate arity).
pub fn simulate_noisy(circuit: &Circuit, noise: &NoiseModel) -> Result<DensityMatrix> {
    noise.validate()?;
    let mut rho = DensityMatrix::zero(circuit.n_qubits())?;
    for g in circuit.gates() {
        rho.apply_gate(g);
        match g.qubits() {
            (a, None) => rho.depolarize(&[a], noise.p1),
            (a, Some(b)) => rho.depolarize(&[a, b], noise.p2),
        }
    }
    Ok(rho)
}
