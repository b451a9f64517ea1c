//! Browser bindings for the interactive demo page in `www/`.
//!
//! Every export returns a JSON string; the page parses it and draws on a
//! canvas.

use ndarray::Array2;
use qradar::pca::{fit_pca, fit_standardizer};
use qradar::qkernel::{self, gram_matrix, KernelMethod};
use qradar::qsim::{bitstring, build_zz_feature_map, sample_shots, NoiseModel};
use qradar::radar_sim::{generate_dataset, sample_seed, synth_sample, RadarConfig, TargetClass};
use qradar::spectral_features::{self, FEATURE_NAMES};
use qradar::svm::EncodingScaler;
use qradar::{rng, Error, Result};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

pub const MAX_QUBITS: usize = 6;
pub const MAX_PER_CLASS: usize = 20;
const MAX_SHOTS: u64 = 1_000_000;

fn parse_class(name: &str) -> Result<TargetClass> {
    TargetClass::from_name(name).ok_or_else(|| Error::invalid("class", format!("unknown target class {name:?}")))
}

/// Spectrogram in dB plus the extracted feature vector of one sample.
pub fn spectrogram(class: &str, seed: u64) -> Result<Value> {
    let class = parse_class(class)?;
    let sample = synth_sample(&RadarConfig::default(), class, sample_seed(seed, class, 0))?;
    let spec = spectral_features::stft(
        &sample.signal,
        spectral_features::DEFAULT_WINDOW,
        spectral_features::DEFAULT_HOP,
    )?;
    let features = spectral_features::extract_features(&spec)?;
    let peak = spec.magnitudes.iter().cloned().fold(f64::MIN_POSITIVE, f64::max);
    let db: Vec<f64> = spec
        .magnitudes
        .iter()
        .map(|&m| 20.0 * (m.max(peak * 1e-6) / peak).log10())
        .collect();
    let named: serde_json::Map<String, Value> = FEATURE_NAMES
        .iter()
        .zip(features.to_array())
        .map(|(n, v)| ((*n).to_string(), json!(v)))
        .collect();
    Ok(json!({
        "class": class.name(),
        "params": sample.params,
        "environment": sample.env,
        "n_frames": spec.n_frames(),
        "n_bins": spec.n_bins(),
        "frame_times": spec.frame_times,
        "bin_freqs": spec.bin_freqs,
        "db": db,
        "features": named,
    }))
}

/// Measured distribution of the feature-map state for `angles` under
/// depolarizing noise of two-qubit strength `p2`, with one shot sample.
pub fn feature_map(angles: &[f64], reps: usize, p2: f64, shots: u64, seed: u64) -> Result<Value> {
    if angles.is_empty() || angles.len() > MAX_QUBITS {
        return Err(Error::invalid("angles", format!("need 1 to {MAX_QUBITS} values, got {}", angles.len())));
    }
    if shots == 0 || shots > MAX_SHOTS {
        return Err(Error::invalid("shots", format!("must be in 1..={MAX_SHOTS}")));
    }
    let circuit = build_zz_feature_map(angles, reps)?.with_measurement();
    let ideal = qkernel::circuit_distribution(&circuit, &NoiseModel::ideal())?;
    let noisy = qkernel::circuit_distribution(&circuit, &NoiseModel::from_p2(p2)?)?;
    let counts = sample_shots(&noisy, shots, &mut rng::stream(seed))?;
    let n = angles.len();
    let p = noisy.probabilities();
    Ok(json!({
        "n_qubits": n,
        "circuit": circuit.stats(),
        "bitstrings": (0..p.len()).map(|i| bitstring(i, n)).collect::<Vec<_>>(),
        "ideal": ideal.probabilities(),
        "noisy": p,
        "sampled": (0..p.len()).map(|i| counts.frequency(i)).collect::<Vec<_>>(),
        "entropy_bits": qkernel::shannon_entropy_bits(p),
        "fidelity_to_ideal": qkernel::classical_fidelity(p, ideal.probabilities()),
    }))
}

/// Exact quantum-kernel Gram matrix of a small synthetic dataset,
/// class-major order.
pub fn kernel_gram(n_per_class: usize, qubits: usize, reps: usize, seed: u64) -> Result<Value> {
    if !(2..=MAX_PER_CLASS).contains(&n_per_class) {
        return Err(Error::invalid("n_per_class", format!("must be in 2..={MAX_PER_CLASS}")));
    }
    if !(1..=MAX_QUBITS).contains(&qubits) {
        return Err(Error::invalid("qubits", format!("must be in 1..={MAX_QUBITS}")));
    }
    let data = generate_dataset(&RadarConfig::default(), n_per_class, seed)?;
    let mut raw = Array2::zeros((data.len(), spectral_features::FEATURE_COUNT));
    for (i, s) in data.iter().enumerate() {
        let f = spectral_features::signal_features(&s.signal)?.to_array();
        raw.row_mut(i).assign(&ndarray::ArrayView1::from(&f));
    }
    let std = fit_standardizer(&raw, Some(&FEATURE_NAMES))?.transform(&raw)?;
    let pca = fit_pca(&std, qubits)?;
    let angles = EncodingScaler::fit(&pca.project(&std)?)?.transform(&pca.project(&std)?)?;
    let k = gram_matrix(&angles, reps, KernelMethod::ExactFidelity, seed)?.entries;

    let n_classes = TargetClass::ALL.len();
    let mut block = vec![vec![(0.0, 0usize); n_classes]; n_classes];
    for i in 0..k.nrows() {
        for j in 0..k.ncols() {
            if i != j {
                let cell = &mut block[data[i].class.index()][data[j].class.index()];
                cell.0 += k[[i, j]];
                cell.1 += 1;
            }
        }
    }
    let block_means: Vec<Vec<f64>> = block
        .iter()
        .map(|r| r.iter().map(|&(s, c)| s / c.max(1) as f64).collect())
        .collect();
    Ok(json!({
        "n": k.nrows(),
        "labels": data.iter().map(|s| s.class.name()).collect::<Vec<_>>(),
        "classes": TargetClass::ALL.iter().map(|c| c.name()).collect::<Vec<_>>(),
        "cumulative_variance": pca.cumulative_variance(),
        "entries": k.iter().copied().collect::<Vec<_>>(),
        "block_means": block_means,
    }))
}

fn export(r: Result<Value>) -> std::result::Result<String, JsError> {
    r.map(|v| v.to_string()).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = spectrogram)]
pub fn spectrogram_js(class: &str, seed: u64) -> std::result::Result<String, JsError> {
    export(spectrogram(class, seed))
}

#[wasm_bindgen(js_name = featureMap)]
pub fn feature_map_js(angles: Vec<f64>, reps: usize, p2: f64, shots: u64, seed: u64) -> std::result::Result<String, JsError> {
    export(feature_map(&angles, reps, p2, shots, seed))
}

#[wasm_bindgen(js_name = kernelGram)]
pub fn kernel_gram_js(n_per_class: usize, qubits: usize, reps: usize, seed: u64) -> std::result::Result<String, JsError> {
    export(kernel_gram(n_per_class, qubits, reps, seed))
}
