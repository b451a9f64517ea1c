//! Fidelity quantum kernels and measurement-distribution analytics.

use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qsim::{
    self, bitstring, build_zz_feature_map, measure_distribution, sample_shots, Circuit, Counts, NoiseModel, Statevector,
};
use crate::{par, rng};

pub use crate::qsim::OutcomeDistribution;

/// How kernel entries are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelMethod {
    ExactFidelity,
    ShotEstimated { shots: u64 },
    NoisyEmulated { noise: NoiseModel, shots: u64 },
}

impl KernelMethod {
    fn validate(&self) -> Result<()> {
        match self {
            KernelMethod::ExactFidelity => Ok(()),
            KernelMethod::ShotEstimated { shots } | KernelMethod::NoisyEmulated { shots, .. } if *shots == 0 => {
                Err(Error::invalid("shots", "must be at least 1"))
            }
            KernelMethod::NoisyEmulated { noise, .. } => noise.validate(),
            KernelMethod::ShotEstimated { .. } => Ok(()),
        }
    }
}

fn check_dims(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    Ok(())
}

/// `|φ(x)⟩ = U(x)|0…0⟩` for the ZZ feature map.
pub fn feature_state(x: &[f64], reps: usize) -> Result<Statevector> {
    Ok(qsim::run(&build_zz_feature_map(x, reps)?))
}

/// `|⟨φ(x)|φ(x')⟩|²`.
pub fn kernel_exact(x: &[f64], xp: &[f64], reps: usize) -> Result<f64> {
    check_dims(x, xp)?;
    Ok(feature_state(x, reps)?.inner(&feature_state(xp, reps)?).norm_sqr())
}

/// `U(x')† U(x)`, whose all-zeros probability is the kernel value.
pub fn compute_uncompute(x: &[f64], xp: &[f64], reps: usize) -> Result<Circuit> {
    check_dims(x, xp)?;
    let mut c = build_zz_feature_map(x, reps)?;
    c.extend(&build_zz_feature_map(xp, reps)?.inverse())?;
    Ok(c.with_measurement())
}

/// Exact outcome distribution of `circuit` run from `|0…0⟩` under `noise`.
pub fn circuit_distribution(circuit: &Circuit, noise: &NoiseModel) -> Result<OutcomeDistribution> {
    if noise.has_gate_noise() {
        let rho = qsim::simulate_noisy(circuit, noise)?;
        Ok(measure_distribution(&rho, noise))
    } else {
        noise.validate()?;
        Ok(measure_distribution(&qsim::run(circuit), noise))
    }
}

/// Frequency of the all-zeros outcome over `shots` runs of the
/// compute-uncompute circuit.
pub fn kernel_shot<R: rand::Rng + ?Sized>(
    x: &[f64],
    xp: &[f64],
    reps: usize,
    shots: u64,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<f64> {
    let dist = circuit_distribution(&compute_uncompute(x, xp, reps)?, noise)?;
    Ok(sample_shots(&dist, shots, rng)?.frequency(0))
}

/// Kernel values between rows of two matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelMatrix {
    pub entries: Array2<f64>,
    pub method: KernelMethod,
}

impl KernelMatrix {
    pub fn shape(&self) -> (usize, usize) {
        self.entries.dim()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for row in self.entries.rows() {
            let line: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
            s.push_str(&line.join(","));
            s.push('\n');
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_csv().as_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path, method: KernelMethod) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let malformed = |reason: String| Error::Malformed {
            path: path.to_path_buf(),
            reason,
        };
        let rows: Vec<Vec<f64>> = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                l.split(',')
                    .map(|v| v.trim().parse::<f64>().map_err(|e| malformed(format!("`{v}`: {e}"))))
                    .collect()
            })
            .collect::<Result<_>>()?;
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(malformed("ragged rows".into()));
        }
        let entries = Array2::from_shape_vec((rows.len(), cols), rows.concat()).map_err(|e| malformed(e.to_string()))?;
        Ok(KernelMatrix { entries, method })
    }
}

fn rows_of(x: &Array2<f64>) -> Vec<Vec<f64>> {
    x.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn feature_states(x: &[Vec<f64>], reps: usize) -> Result<Vec<Statevector>> {
    par::map_indices(x.len(), |i| feature_state(&x[i], reps)).into_iter().collect()
}

fn estimate(a: &[f64], b: &[f64], reps: usize, method: &KernelMethod, seed: u64, i: usize, j: usize) -> Result<f64> {
    let mut r = rng::derived_stream(seed, i as u64, j as u64);
    match *method {
        KernelMethod::ExactFidelity => kernel_exact(a, b, reps),
        KernelMethod::ShotEstimated { shots } => kernel_shot(a, b, reps, shots, &NoiseModel::ideal(), &mut r),
        KernelMethod::NoisyEmulated { noise, shots } => kernel_shot(a, b, reps, shots, &noise, &mut r),
    }
}

/// Square train kernel. Each unordered pair is evaluated once; shot methods
/// draw from a stream derived from `(seed, i, j)` and pin the diagonal to 1.
pub fn gram_matrix(x: &Array2<f64>, reps: usize, method: KernelMethod, seed: u64) -> Result<KernelMatrix> {
    method.validate()?;
    let n = x.nrows();
    let rows = rows_of(x);
    let mut k = Array2::<f64>::zeros((n, n));
    if let KernelMethod::ExactFidelity = method {
        let states = feature_states(&rows, reps)?;
        let vals = par::map_indices(n, |i| (i..n).map(|j| states[i].inner(&states[j]).norm_sqr()).collect::<Vec<_>>());
        for (i, row) in vals.into_iter().enumerate() {
            for (off, v) in row.into_iter().enumerate() {
                k[[i, i + off]] = v;
                k[[i + off, i]] = v;
            }
        }
    } else {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
        let vals: Vec<Result<f64>> =
            par::map_indices(pairs.len(), |p| {
                let (i, j) = pairs[p];
                estimate(&rows[i], &rows[j], reps, &method, seed, i, j)
            });
        for ((i, j), v) in pairs.into_iter().zip(vals) {
            let v = v?;
            k[[i, j]] = v;
            k[[j, i]] = v;
        }
        for i in 0..n {
            k[[i, i]] = 1.0;
        }
    }
    Ok(KernelMatrix { entries: k, method })
}

/// Rectangular kernel between `a` (rows) and `b` (columns).
pub fn cross_kernel(a: &Array2<f64>, b: &Array2<f64>, reps: usize, method: KernelMethod, seed: u64) -> Result<KernelMatrix> {
    method.validate()?;
    if a.ncols() != b.ncols() {
        return Err(Error::DimensionMismatch {
            expected: a.ncols(),
            actual: b.ncols(),
        });
    }
    let (ra, rb) = (rows_of(a), rows_of(b));
    let (n, m) = (ra.len(), rb.len());
    let mut k = Array2::<f64>::zeros((n, m));
    if let KernelMethod::ExactFidelity = method {
        let sa = feature_states(&ra, reps)?;
        let sb = feature_states(&rb, reps)?;
        let vals = par::map_indices(n, |i| sb.iter().map(|s| sa[i].inner(s).norm_sqr()).collect::<Vec<_>>());
        for (i, row) in vals.into_iter().enumerate() {
            for (j, v) in row.into_iter().enumerate() {
                k[[i, j]] = v;
            }
        }
    } else {
        let vals: Vec<Result<f64>> =
            par::map_indices(n * m, |p| estimate(&ra[p / m], &rb[p % m], reps, &method, seed, p / m, p % m));
        for (p, v) in vals.into_iter().enumerate() {
            k[[p / m, p % m]] = v?;
        }
    }
    Ok(KernelMatrix { entries: k, method })
}

/// `−Σ p log₂ p` with `0 log 0 = 0`.
pub fn shannon_entropy_bits(p: &[f64]) -> f64 {
    -p.iter().filter(|&&v| v > 0.0).map(|&v| v * v.log2()).sum::<f64>()
}

/// Bhattacharyya fidelity `(Σ √(p_i q_i))²`.
pub fn classical_fidelity(p: &[f64], q: &[f64]) -> f64 {
    let bc: f64 = p.iter().zip(q).map(|(a, b)| (a * b).sqrt()).sum();
    (bc * bc).min(1.0)
}

/// Share of least-probable outcomes averaged into the noise floor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseFloorMode {
    #[default]
    BottomHalf,
    BottomQuartile,
}

/// Mean probability of the least-probable half (or quarter) of outcomes.
pub fn noise_floor(p: &[f64], mode: NoiseFloorMode) -> f64 {
    let mut sorted = p.to_vec();
    sorted.sort_by(f64::total_cmp);
    let count = match mode {
        NoiseFloorMode::BottomHalf => sorted.len() / 2,
        NoiseFloorMode::BottomQuartile => sorted.len() / 4,
    }
    .max(1);
    sorted[..count].iter().sum::<f64>() / count as f64
}

/// Half-width of the 95% normal interval on a frequency from `shots` draws.
pub fn top1_uncertainty(p_hat: f64, shots: u64) -> f64 {
    1.96 * (p_hat * (1.0 - p_hat) / shots as f64).sqrt()
}

/// Measured data for [`analyze_distribution`].
pub enum Measured<'a> {
    Exact(&'a OutcomeDistribution),
    Sampled(&'a Counts),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopOutcome {
    pub bitstring: String,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionReport {
    pub top_k: Vec<TopOutcome>,
    pub shannon_entropy_bits: f64,
    pub classical_fidelity: f64,
    pub noise_floor: f64,
    pub noise_floor_mode: NoiseFloorMode,
    /// Present when the measured data are shot counts.
    pub shots: Option<u64>,
    pub top1_uncertainty: Option<f64>,
}

impl DistributionReport {
    pub fn top_bitstrings(&self) -> Vec<&str> {
        self.top_k.iter().map(|t| t.bitstring.as_str()).collect()
    }
}

/// Indices of the `k` most probable outcomes, ties broken by lower index.
pub fn top_k_indices(p: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..p.len()).collect();
    idx.sort_by(|&a, &b| p[b].total_cmp(&p[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

pub fn analyze_distribution(
    measured: Measured<'_>,
    ideal: &OutcomeDistribution,
    top_k: usize,
    mode: NoiseFloorMode,
) -> Result<DistributionReport> {
    let (dist, shots) = match measured {
        Measured::Exact(d) => (d.clone(), None),
        Measured::Sampled(c) => (c.to_distribution(), Some(c.shots())),
    };
    if dist.n_qubits() != ideal.n_qubits() {
        return Err(Error::DimensionMismatch {
            expected: ideal.probabilities().len(),
            actual: dist.probabilities().len(),
        });
    }
    let p = dist.probabilities();
    let n = dist.n_qubits();
    let top = top_k_indices(p, top_k);
    Ok(DistributionReport {
        top_k: top
            .iter()
            .map(|&i| TopOutcome {
                bitstring: bitstring(i, n),
                probability: p[i],
            })
            .collect(),
        shannon_entropy_bits: shannon_entropy_bits(p),
        classical_fidelity: classical_fidelity(p, ideal.probabilities()),
        noise_floor: noise_floor(p, mode),
        noise_floor_mode: mode,
        shots,
        top1_uncertainty: shots.map(|s| top1_uncertainty(p[top[0]], s)),
    })
}

/// Result of fitting a one-parameter noise model to a target fidelity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub target_fidelity: f64,
    pub achieved_fidelity: f64,
    pub noise: NoiseModel,
    pub iterations: usize,
}

pub const CALIBRATION_P2_MAX: f64 = 0.2;

/// Bisection on `p2 ∈ [0, 0.2]` (with `p1 = p2/10`, readout `p2/2`) so the
/// exact noisy distribution of `circuit` has the target classical fidelity
/// against the noiseless one.
pub fn calibrate_noise(circuit: &Circuit, target_fidelity: f64) -> Result<Calibration> {
    if !(0.0..=1.0).contains(&target_fidelity) {
        return Err(Error::ParameterRange {
            name: "target_fidelity",
            value: target_fidelity,
            min: 0.0,
            max: 1.0,
            context: "noise calibration".into(),
        });
    }
    let ideal = circuit_distribution(circuit, &NoiseModel::ideal())?;
    let fid = |p2: f64| -> Result<f64> {
        let d = circuit_distribution(circuit, &NoiseModel::from_p2(p2)?)?;
        Ok(classical_fidelity(d.probabilities(), ideal.probabilities()))
    };
    let floor = fid(CALIBRATION_P2_MAX)?;
    if floor > target_fidelity {
        return Err(Error::Calibration(format!(
            "target fidelity {target_fidelity} unreachable: p2 = {CALIBRATION_P2_MAX} still gives {floor:.4}"
        )));
    }
    let (mut lo, mut hi) = (0.0, CALIBRATION_P2_MAX);
    let mut iterations = 0;
    while hi - lo > 1e-10 && iterations < 100 {
        let mid = 0.5 * (lo + hi);
        if fid(mid)? > target_fidelity {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    let p2 = 0.5 * (lo + hi);
    Ok(Calibration {
        target_fidelity,
        achieved_fidelity: fid(p2)?,
        noise: NoiseModel::from_p2(p2)?,
        iterations,
    })
}
