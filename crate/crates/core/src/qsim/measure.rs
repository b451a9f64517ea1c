use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use super::state::{DensityMatrix, Statevector};
use super::NoiseModel;
use crate::error::{Error, Result};

/// Probabilities over the `2^n` computational basis outcomes, indexed so that
/// qubit `q` is bit `q` of the index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeDistribution {
    n_qubits: usize,
    probabilities: Vec<f64>,
}

/// Bitstring for outcome `index`, qubit 0 leftmost.
pub fn bitstring(index: usize, n_qubits: usize) -> String {
    (0..n_qubits)
        .map(|q| if index >> q & 1 == 1 { '1' } else { '0' })
        .collect()
}

/// Inverse of [`bitstring`].
pub fn parse_bitstring(s: &str) -> Result<usize> {
    s.chars().enumerate().try_fold(0usize, |acc, (q, ch)| match ch {
        '0' => Ok(acc),
        '1' => Ok(acc | 1 << q),
        _ => Err(Error::invalid("bitstring", format!("`{s}` has a non-binary character"))),
    })
}

impl OutcomeDistribution {
    pub fn new(probabilities: Vec<f64>) -> Result<Self> {
        let dim = probabilities.len();
        if dim < 2 || !dim.is_power_of_two() {
            return Err(Error::invalid("probabilities", format!("length {dim} is not a power of two")));
        }
        if probabilities.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::invalid("probabilities", "entries must be non-negative"));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("probabilities", format!("sum {total} is not 1")));
        }
        Ok(OutcomeDistribution {
            n_qubits: dim.trailing_zeros() as usize,
            probabilities: probabilities.iter().map(|p| p / total).collect(),
        })
    }

    pub fn uniform(n_qubits: usize) -> Self {
        let dim = 1usize << n_qubits;
        OutcomeDistribution {
            n_qubits,
            probabilities: vec![1.0 / dim as f64; dim],
        }
    }

    pub fn point(n_qubits: usize, index: usize) -> Self {
        let mut probabilities = vec![0.0; 1 << n_qubits];
        probabilities[index] = 1.0;
        OutcomeDistribution {
            n_qubits,
            probabilities,
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn probability(&self, index: usize) -> f64 {
        self.probabilities[index]
    }

    /// Applies independent symmetric bit flips with probability `flip` per qubit.
    pub fn with_readout_error(mut self, flip: f64) -> Self {
        if flip == 0.0 {
            return self;
        }
        for q in 0..self.n_qubits {
            let m = 1 << q;
            for k in (0..self.probabilities.len()).filter(|k| k & m == 0) {
                let (a, b) = (self.probabilities[k], self.probabilities[k | m]);
                self.probabilities[k] = (1.0 - flip) * a + flip * b;
                self.probabilities[k | m] = flip * a + (1.0 - flip) * b;
            }
        }
        self
    }

    /// Probabilities keyed by bitstring (qubit 0 leftmost).
    pub fn to_map(&self) -> BTreeMap<String, f64> {
        self.probabilities
            .iter()
            .enumerate()
            .map(|(i, p)| (bitstring(i, self.n_qubits), *p))
            .collect()
    }
}

/// Source of computational-basis probabilities.
pub enum MeasuredState<'a> {
    Pure(&'a Statevector),
    Mixed(&'a DensityMatrix),
}

impl<'a> From<&'a Statevector> for MeasuredState<'a> {
    fn from(s: &'a Statevector) -> Self {
        MeasuredState::Pure(s)
    }
}

impl<'a> From<&'a DensityMatrix> for MeasuredState<'a> {
    fn from(s: &'a DensityMatrix) -> Self {
        MeasuredState::Mixed(s)
    }
}

/// Basis-state probabilities followed by readout confusion from `noise`.
pub fn measure_distribution<'a>(state: impl Into<MeasuredState<'a>>, noise: &NoiseModel) -> OutcomeDistribution {
    let (n_qubits, raw) = match state.into() {
        MeasuredState::Pure(s) => (s.n_qubits(), s.probabilities()),
        MeasuredState::Mixed(r) => (r.n_qubits(), r.probabilities()),
    };
    let total: f64 = raw.iter().sum();
    let probabilities = raw.iter().map(|p| p / total).collect();
    OutcomeDistribution {
        n_qubits,
        probabilities,
    }
    .with_readout_error(noise.readout_flip)
}

/// Shot counts per outcome.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    n_qubits: usize,
    counts: Vec<u64>,
}

impl Counts {
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn shots(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn get(&self, index: usize) -> u64 {
        self.counts[index]
    }

    pub fn frequency(&self, index: usize) -> f64 {
        self.counts[index] as f64 / self.shots() as f64
    }

    /// Empirical (plug-in) distribution.
    pub fn to_distribution(&self) -> OutcomeDistribution {
        let shots = self.shots() as f64;
        OutcomeDistribution {
            n_qubits: self.n_qubits,
            probabilities: self.counts.iter().map(|&c| c as f64 / shots).collect(),
        }
    }

    /// Non-zero counts keyed by bitstring (qubit 0 leftmost).
    pub fn to_map(&self) -> BTreeMap<String, u64> {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, &c)| (bitstring(i, self.n_qubits), c))
            .collect()
    }
}

/// Multinomial draw of `shots` outcomes from `dist`, by sequential binomials.
pub fn sample_shots<R: Rng + ?Sized>(dist: &OutcomeDistribution, shots: u64, rng: &mut R) -> Result<Counts> {
    if shots == 0 {
        return Err(Error::invalid("shots", "must be at least 1"));
    }
    let probs = dist.probabilities();
    let mut counts = vec![0u64; probs.len()];
    let mut remaining = shots;
    let mut mass = 1.0f64;
    let last = probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
    for (i, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if i == last {
            counts[i] = remaining;
            break;
        }
        if p <= 0.0 {
            continue;
        }
        let q = (p / mass).clamp(0.0, 1.0);
        let c = Binomial::new(remaining, q).expect("probability clamped to [0, 1]").sample(rng);
        counts[i] = c;
        remaining -= c;
        mass -= p;
    }
    Ok(Counts {
        n_qubits: dist.n_qubits(),
        counts,
    })
}
