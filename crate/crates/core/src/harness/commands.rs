use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::config::{ExperimentConfig, NoisePreset};
use super::data::{self, read_json, require, write_json, write_text, Split};
use super::svg::{self, Series};
use crate::error::{Error, Result};
use crate::pca::{fit_pca, fit_standardizer, pca_sweep, PcaModel, Standardizer};
use crate::qkernel::{
    self, analyze_distribution, calibrate_noise, circuit_distribution, classical_fidelity, cross_kernel, gram_matrix,
    noise_floor, shannon_entropy_bits, top_k_indices, Calibration, KernelMatrix, KernelMethod, Measured, NoiseFloorMode,
};
use crate::qsim::{bitstring, build_zz_feature_map, sample_shots, Circuit, CircuitStats, NoiseModel, MAX_QUBITS};
use crate::radar_sim::{RadarConfig, TargetClass};
use crate::spectral_features::FEATURE_NAMES;
use crate::svm::{self, evaluate, EncodingScaler, Metrics, SvmConfig, SvmModel};
use crate::rng;

pub mod files {
    pub const CONFIG: &str = "config.json";
    pub const FEATURES: &str = "features.csv";
    pub const MANIFEST: &str = "manifest.csv";
    pub const SPLIT: &str = "split.json";
    pub const SIGNALS: &str = "signals";
    pub const DATASET: &str = "dataset.json";
    pub const PCA_SWEEP: &str = "pca_sweep.json";
    pub const PCA_SWEEP_CSV: &str = "pca_sweep.csv";
    pub const PCA_SWEEP_SVG: &str = "pca_sweep.svg";
    pub const METRICS: &str = "metrics.json";
    pub const METRICS_SVG: &str = "metrics.svg";
    pub const CONFUSION_CLASSICAL: &str = "confusion_classical.csv";
    pub const CONFUSION_QSVM: &str = "confusion_qsvm.csv";
    pub const ENCODING: &str = "encoding.json";
    pub const KERNEL_TRAIN: &str = "kernel_train.csv";
    pub const KERNEL_TEST: &str = "kernel_test.csv";
    pub const MODEL_CLASSICAL: &str = "model_classical.json";
    pub const MODEL_QSVM: &str = "model_qsvm.json";
    pub const SHOTS: &str = "shots.json";
    pub const SHOTS_CSV: &str = "shots.csv";
    pub const SHOTS_DISTRIBUTION: &str = "shots_distribution.csv";
    pub const HW_EMULATE: &str = "hw_emulate.json";
    pub const HW_EMULATE_CSV: &str = "hw_emulate.csv";
    pub const HW_EMULATE_SVG: &str = "hw_emulate.svg";
    pub const REPORT: &str = "report.json";
    pub const REPORT_MD: &str = "report.md";
    pub const TIMINGS: &str = "timings.json";
}

/// Seeds per shot count in the empirical uncertainty-ratio estimate.
pub const RATIO_SEEDS: usize = 1000;
const SHOT_TAG: u64 = 1000;
const RATIO_TAG: u64 = 2000;
const HW_TAG: u64 = 3000;
/// Largest sweep bound, reachable only through the classical surrogate.
pub const SWEEP_K_MAX: usize = 12;
const TOP_K: usize = 5;

fn n_classes() -> usize {
    TargetClass::ALL.len()
}

fn class_names() -> Vec<&'static str> {
    TargetClass::ALL.iter().map(|c| c.name()).collect()
}

fn ensure_out_dir(cfg: &ExperimentConfig) -> Result<()> {
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))
}

/// Adds `seconds` for `command` to `timings.json`, kept apart from results
/// so that result files stay byte-reproducible.
fn record_timing(cfg: &ExperimentConfig, command: &str, started: Instant) -> Result<()> {
    let path = cfg.out_path(files::TIMINGS);
    let mut t: BTreeMap<String, f64> = if path.exists() { read_json(&path)? } else { BTreeMap::new() };
    t.insert(command.to_string(), started.elapsed().as_secs_f64());
    write_json(&path, &t)
}

// ---------------------------------------------------------------- generate

#[derive(Debug, Clone, Copy, Default)]
pub struct GenerateOptions {
    /// Also write each signal as an `.iq` file.
    pub save_signals: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub label: String,
    pub total: usize,
    pub train: usize,
    pub test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub kind: String,
    pub config_hash: String,
    pub n_samples: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub classes: Vec<ClassCounts>,
}

pub fn cmd_generate(cfg: &ExperimentConfig, opts: GenerateOptions) -> Result<DatasetSummary> {
    let started = Instant::now();
    cfg.validate()?;
    ensure_out_dir(cfg)?;
    let signal_dir = opts.save_signals.then(|| cfg.out_path(files::SIGNALS));
    let ds = data::build_dataset(&RadarConfig::default(), cfg.n_per_class, cfg.seed, signal_dir.as_deref())?;
    let split = data::stratified_split(&ds.labels, n_classes(), cfg.split, cfg.seed)?;

    write_json(&cfg.out_path(files::CONFIG), cfg)?;
    data::write_features_csv(&cfg.out_path(files::FEATURES), &ds.features, &ds.labels)?;
    data::write_manifest(&cfg.out_path(files::MANIFEST), &ds.records, signal_dir.as_deref())?;
    split.save(&cfg.out_path(files::SPLIT))?;

    let count = |set: &[usize], c: usize| set.iter().filter(|&&i| ds.labels[i] == c).count();
    let summary = DatasetSummary {
        kind: "generate".into(),
        config_hash: cfg.hash(),
        n_samples: ds.labels.len(),
        n_train: split.train.len(),
        n_test: split.test.len(),
        classes: TargetClass::ALL
            .iter()
            .map(|c| ClassCounts {
                label: c.name().into(),
                total: ds.labels.iter().filter(|&&l| l == c.index()).count(),
                train: count(&split.train, c.index()),
                test: count(&split.test, c.index()),
            })
            .collect(),
    };
    write_json(&cfg.out_path(files::DATASET), &summary)?;
    record_timing(cfg, "generate", started)?;
    Ok(summary)
}

// ---------------------------------------------------------------- shared

/// Standardized train/test matrices from the persisted dataset.
pub struct Prepared {
    pub split: Split,
    pub standardizer: Standardizer,
    pub train: Array2<f64>,
    pub test: Array2<f64>,
    pub train_labels: Vec<usize>,
    pub test_labels: Vec<usize>,
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    let fpath = cfg.out_path(files::FEATURES);
    let spath = cfg.out_path(files::SPLIT);
    require(&[fpath.clone(), spath.clone()])?;
    let (x, labels) = data::read_features_csv(&fpath)?;
    let split = Split::load(&spath)?;
    if let Some(&bad) = split.train.iter().chain(&split.test).find(|&&i| i >= labels.len()) {
        return Err(Error::Malformed {
            path: spath,
            reason: format!("row index {bad} beyond {} feature rows", labels.len()),
        });
    }
    let rows = |ix: &[usize]| x.select(ndarray::Axis(0), ix);
    let (raw_train, raw_test) = (rows(&split.train), rows(&split.test));
    let standardizer = fit_standardizer(&raw_train, Some(&FEATURE_NAMES))?;
    Ok(Prepared {
        train: standardizer.transform(&raw_train)?,
        test: standardizer.transform(&raw_test)?,
        train_labels: split.train.iter().map(|&i| labels[i]).collect(),
        test_labels: split.test.iter().map(|&i| labels[i]).collect(),
        standardizer,
        split,
    })
}

/// Exact-kernel QSVM on already projected components.
pub struct QuantumFit {
    pub scaler: EncodingScaler,
    pub train_kernel: KernelMatrix,
    pub test_kernel: KernelMatrix,
    pub model: SvmModel,
    pub predictions: Vec<usize>,
}

pub fn quantum_fit(
    train: &Array2<f64>,
    train_labels: &[usize],
    test: &Array2<f64>,
    reps: usize,
    seed: u64,
) -> Result<QuantumFit> {
    let (etr, ete, scaler) = svm::scale_for_encoding(train, test)?;
    let train_kernel = gram_matrix(&etr, reps, KernelMethod::ExactFidelity, seed)?;
    let test_kernel = cross_kernel(&ete, &etr, reps, KernelMethod::ExactFidelity, seed)?;
    let mut model = svm::train_multiclass_precomputed(&train_kernel.entries, train_labels, &SvmConfig::precomputed())?;
    let predictions = model.predict_precomputed(&test_kernel.entries)?;
    model.encoding = Some(scaler.clone());
    Ok(QuantumFit {
        scaler,
        train_kernel,
        test_kernel,
        model,
        predictions,
    })
}

// ---------------------------------------------------------------- pca sweep

#[derive(Debug, Clone, Copy)]
pub struct SweepOptions {
    pub k_max: usize,
    /// Permits `k` beyond the simulator cap by substituting an RBF kernel.
    pub classical_surrogate: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            k_max: MAX_QUBITS,
            classical_surrogate: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTableRow {
    pub k: usize,
    pub cumulative_variance: f64,
    pub accuracy: f64,
    /// Accuracy minus the previous row's; absent on the first row.
    pub delta_accuracy: Option<f64>,
    /// `quantum_exact` or `classical_surrogate`.
    pub kernel: String,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub kind: String,
    pub config_hash: String,
    pub data_hash: String,
    pub rows: Vec<SweepTableRow>,
}

pub fn cmd_pca_sweep(cfg: &ExperimentConfig, opts: SweepOptions) -> Result<SweepReport> {
    let started = Instant::now();
    cfg.validate()?;
    if !(2..=SWEEP_K_MAX).contains(&opts.k_max) {
        return Err(Error::ParameterRange {
            name: "k_max",
            value: opts.k_max as f64,
            min: 2.0,
            max: SWEEP_K_MAX as f64,
            context: "pca sweep".into(),
        });
    }
    if opts.k_max > MAX_QUBITS && !opts.classical_surrogate {
        return Err(Error::QubitCap {
            requested: opts.k_max,
            cap: MAX_QUBITS,
        });
    }
    let p = prepare(cfg)?;
    let sweep = pca_sweep(&p.train, &p.train_labels, &p.test, &p.test_labels, 2..=opts.k_max, |k, tr, ytr, te| {
        if k <= MAX_QUBITS {
            Ok(quantum_fit(tr, ytr, te, cfg.reps, cfg.seed)?.predictions)
        } else {
            svm::train_multiclass(tr, ytr, &SvmConfig::default())?.predict(te)
        }
    })?;
    let hash = cfg.hash();
    let rows: Vec<SweepTableRow> = sweep
        .iter()
        .enumerate()
        .map(|(i, r)| SweepTableRow {
            k: r.k,
            cumulative_variance: r.cumulative_variance,
            accuracy: r.accuracy,
            delta_accuracy: (i > 0).then(|| r.accuracy - sweep[i - 1].accuracy),
            kernel: if r.k <= MAX_QUBITS { "quantum_exact" } else { "classical_surrogate" }.into(),
            config_hash: hash.clone(),
        })
        .collect();
    let report = SweepReport {
        kind: "pca_sweep".into(),
        config_hash: hash,
        data_hash: cfg.data_hash(),
        rows,
    };

    ensure_out_dir(cfg)?;
    write_json(&cfg.out_path(files::PCA_SWEEP), &report)?;
    let mut csv = String::from("k,cumulative_variance,accuracy,delta_accuracy,kernel,config_hash\n");
    for r in &report.rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.k,
            r.cumulative_variance,
            r.accuracy,
            r.delta_accuracy.map(|d| d.to_string()).unwrap_or_default(),
            r.kernel,
            r.config_hash
        ));
    }
    write_text(&cfg.out_path(files::PCA_SWEEP_CSV), &csv)?;
    let ks: Vec<f64> = report.rows.iter().map(|r| r.k as f64).collect();
    let chart = svg::line_chart(
        "PCA dimensionality sweep",
        "components k",
        "fraction",
        &ks,
        &[
            Series {
                name: "test accuracy".into(),
                values: report.rows.iter().map(|r| r.accuracy).collect(),
            },
            Series {
                name: "cumulative variance".into(),
                values: report.rows.iter().map(|r| r.cumulative_variance).collect(),
            },
        ],
    );
    write_text(&cfg.out_path(files::PCA_SWEEP_SVG), &chart)?;
    record_timing(cfg, "pca-sweep", started)?;
    Ok(report)
}

// ---------------------------------------------------------------- compare

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierRow {
    pub classifier: String,
    pub n_features: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub max_kkt_violation: f64,
    pub config_hash: String,
}

impl ClassifierRow {
    fn new(name: &str, n_features: usize, m: &Metrics, kkt: f64, hash: &str) -> Self {
        ClassifierRow {
            classifier: name.into(),
            n_features,
            accuracy: m.accuracy,
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
            macro_precision: m.macro_precision,
            macro_recall: m.macro_recall,
            macro_f1: m.macro_f1,
            max_kkt_violation: kkt,
            config_hash: hash.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub kind: String,
    pub config_hash: String,
    pub data_hash: String,
    pub labels: Vec<String>,
    pub rows: Vec<ClassifierRow>,
    /// `confusion[truth][pred]` per classifier.
    pub confusion: BTreeMap<String, Vec<Vec<u64>>>,
    /// Classical minus QSVM accuracy, in percentage points.
    pub accuracy_gap_points: f64,
    pub classical_gamma: f64,
    pub qsvm_cumulative_variance: f64,
    pub qsvm_kernel_offdiag_mean: f64,
}

/// Everything needed to re-encode a raw feature row for the quantum model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingArtifact {
    pub config_hash: String,
    /// [`ExperimentConfig::data_hash`] of the producing run.
    pub data_hash: String,
    pub qubits: usize,
    pub reps: usize,
    pub standardizer: Standardizer,
    pub pca: PcaModel,
    pub scaler: EncodingScaler,
}

impl EncodingArtifact {
    /// Raw feature rows → feature-map angles.
    pub fn encode(&self, raw: &Array2<f64>) -> Result<Array2<f64>> {
        self.scaler.transform(&self.pca.project(&self.standardizer.transform(raw)?)?)
    }
}

fn confusion_csv(m: &Metrics, hash: &str) -> String {
    let mut out = String::new();
    for (i, line) in m.confusion_csv(&class_names()).lines().enumerate() {
        out.push_str(line);
        out.push(',');
        out.push_str(if i == 0 { "config_hash" } else { hash });
        out.push('\n');
    }
    out
}

pub fn cmd_compare(cfg: &ExperimentConfig) -> Result<CompareReport> {
    let started = Instant::now();
    cfg.validate()?;
    let p = prepare(cfg)?;
    let hash = cfg.hash();

    let classical = svm::train_multiclass(&p.train, &p.train_labels, &SvmConfig::default())?;
    let c_metrics = evaluate(&classical.predict(&p.test)?, &p.test_labels, n_classes())?;
    let gamma = match classical.kernel {
        svm::ResolvedKernel::Rbf { gamma } => gamma,
        svm::ResolvedKernel::Precomputed => f64::NAN,
    };

    let pca = fit_pca(&p.train, cfg.qubits)?;
    let q = quantum_fit(&pca.project(&p.train)?, &p.train_labels, &pca.project(&p.test)?, cfg.reps, cfg.seed)?;
    let q_metrics = evaluate(&q.predictions, &p.test_labels, n_classes())?;
    let k = &q.train_kernel.entries;
    let n = k.nrows();
    let offdiag = if n > 1 { (k.sum() - k.diag().sum()) / (n * (n - 1)) as f64 } else { 0.0 };

    let report = CompareReport {
        kind: "compare".into(),
        config_hash: hash.clone(),
        data_hash: cfg.data_hash(),
        labels: class_names().iter().map(|s| s.to_string()).collect(),
        rows: vec![
            ClassifierRow::new("classical_rbf", p.train.ncols(), &c_metrics, classical.max_kkt_violation(), &hash),
            ClassifierRow::new("qsvm_exact", cfg.qubits, &q_metrics, q.model.max_kkt_violation(), &hash),
        ],
        confusion: BTreeMap::from([
            ("classical_rbf".to_string(), c_metrics.confusion.clone()),
            ("qsvm_exact".to_string(), q_metrics.confusion.clone()),
        ]),
        accuracy_gap_points: 100.0 * (c_metrics.accuracy - q_metrics.accuracy),
        classical_gamma: gamma,
        qsvm_cumulative_variance: pca.cumulative_variance(),
        qsvm_kernel_offdiag_mean: offdiag,
    };

    ensure_out_dir(cfg)?;
    write_json(&cfg.out_path(files::METRICS), &report)?;
    write_text(&cfg.out_path(files::CONFUSION_CLASSICAL), &confusion_csv(&c_metrics, &hash))?;
    write_text(&cfg.out_path(files::CONFUSION_QSVM), &confusion_csv(&q_metrics, &hash))?;
    write_json(
        &cfg.out_path(files::ENCODING),
        &EncodingArtifact {
            config_hash: hash.clone(),
            data_hash: cfg.data_hash(),
            qubits: cfg.qubits,
            reps: cfg.reps,
            standardizer: p.standardizer.clone(),
            pca,
            scaler: q.scaler.clone(),
        },
    )?;
    q.train_kernel.write_csv(&cfg.out_path(files::KERNEL_TRAIN))?;
    q.test_kernel.write_csv(&cfg.out_path(files::KERNEL_TEST))?;
    classical.save(&cfg.out_path(files::MODEL_CLASSICAL))?;
    q.model.save(&cfg.out_path(files::MODEL_QSVM))?;
    let metric_names = ["accuracy", "precision", "recall", "f1"];
    let chart = svg::bar_chart(
        "Classical SVM vs QSVM",
        "score",
        &metric_names.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
        &report
            .rows
            .iter()
            .map(|r| Series {
                name: r.classifier.clone(),
                values: vec![r.accuracy, r.precision, r.recall, r.f1],
            })
            .collect::<Vec<_>>(),
    );
    write_text(&cfg.out_path(files::METRICS_SVG), &chart)?;
    record_timing(cfg, "compare", started)?;
    Ok(report)
}

// ---------------------------------------------------------------- shots

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Representative {
    /// Position within the test split.
    pub test_position: usize,
    /// Row of `features.csv`.
    pub row: usize,
    pub label: String,
    pub angles: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresetNoise {
    pub preset: NoisePreset,
    pub target_fidelity: Option<f64>,
    pub achieved_fidelity: f64,
    pub noise: NoiseModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotRow {
    pub preset: NoisePreset,
    pub shots: u64,
    pub top1_bitstring: String,
    pub top1_probability: f64,
    pub entropy_bits: f64,
    pub top1_uncertainty: f64,
    pub classical_fidelity: f64,
    /// Entropy of the exact distribution of the same preset.
    pub exact_entropy_bits: f64,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyRatio {
    pub preset: NoisePreset,
    pub outcome: String,
    pub probability: f64,
    pub shots_low: u64,
    pub shots_high: u64,
    pub n_seeds: usize,
    pub std_low: f64,
    pub std_high: f64,
    pub empirical_ratio: f64,
    /// `sqrt(shots_high / shots_low)`.
    pub analytic_ratio: f64,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotsReport {
    pub kind: String,
    pub config_hash: String,
    pub data_hash: String,
    pub representative: Representative,
    pub presets: Vec<PresetNoise>,
    pub rows: Vec<ShotRow>,
    pub uncertainty_ratio: UncertaintyRatio,
}

/// First helicopter sample of the test split, encoded with the persisted
/// compare-stage transforms.
pub fn representative(cfg: &ExperimentConfig) -> Result<(Representative, EncodingArtifact)> {
    let enc_path = cfg.out_path(files::ENCODING);
    let fpath = cfg.out_path(files::FEATURES);
    let spath = cfg.out_path(files::SPLIT);
    require(&[enc_path.clone(), fpath.clone(), spath.clone()])?;
    let enc: EncodingArtifact = read_json(&enc_path)?;
    if enc.data_hash != cfg.data_hash() {
        return Err(Error::Malformed {
            path: enc_path,
            reason: "written for a different dataset or encoding configuration".into(),
        });
    }
    let (x, labels) = data::read_features_csv(&fpath)?;
    let split = Split::load(&spath)?;
    let target = TargetClass::Helicopter.index();
    let (pos, &row) = split
        .test
        .iter()
        .enumerate()
        .find(|(_, &i)| labels.get(i) == Some(&target))
        .ok_or_else(|| Error::DegenerateInput("test split holds no helicopter sample".into()))?;
    let angles = enc.encode(&x.select(ndarray::Axis(0), &[row]))?.row(0).to_vec();
    Ok((
        Representative {
            test_position: pos,
            row,
            label: TargetClass::Helicopter.name().into(),
            angles,
        },
        enc,
    ))
}

/// Measured feature-map circuit of the representative sample.
pub fn reference_circuit(rep: &Representative, reps: usize) -> Result<Circuit> {
    Ok(build_zz_feature_map(&rep.angles, reps)?.with_measurement())
}

fn preset_noise(preset: NoisePreset, circuit: &Circuit) -> Result<PresetNoise> {
    match preset.target_fidelity() {
        None => Ok(PresetNoise {
            preset,
            target_fidelity: None,
            achieved_fidelity: 1.0,
            noise: NoiseModel::ideal(),
        }),
        Some(t) => {
            let Calibration {
                achieved_fidelity,
                noise,
                ..
            } = calibrate_noise(circuit, t)?;
            Ok(PresetNoise {
                preset,
                target_fidelity: Some(t),
                achieved_fidelity,
                noise,
            })
        }
    }
}

fn population_std(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt()
}

/// Spread of the frequency of outcome `index` over `n_seeds` independent
/// samplings of `shots` shots.
pub fn frequency_std(dist: &qkernel::OutcomeDistribution, index: usize, shots: u64, n_seeds: usize, seed: u64) -> Result<f64> {
    let freqs = (0..n_seeds)
        .map(|s| {
            let mut r = rng::derived_stream(seed, RATIO_TAG + shots, s as u64);
            Ok(sample_shots(dist, shots, &mut r)?.frequency(index))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(population_std(&freqs))
}

pub fn cmd_shots(cfg: &ExperimentConfig) -> Result<ShotsReport> {
    let started = Instant::now();
    cfg.validate()?;
    let (rep, enc) = representative(cfg)?;
    let circuit = reference_circuit(&rep, enc.reps)?;
    let ideal = circuit_distribution(&circuit, &NoiseModel::ideal())?;
    let hash = cfg.hash();

    let presets = NoisePreset::ALL
        .iter()
        .map(|&p| preset_noise(p, &circuit))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut dist_csv = String::from("preset,shots,bitstring,count,frequency,exact_probability,config_hash\n");
    let mut ratio_source = None;
    for pn in &presets {
        let exact = circuit_distribution(&circuit, &pn.noise)?;
        let exact_entropy = shannon_entropy_bits(exact.probabilities());
        if pn.preset == cfg.noise_preset {
            ratio_source = Some(exact.clone());
        }
        for &shots in &cfg.shots {
            let mut r = rng::derived_stream(cfg.seed, SHOT_TAG + pn.preset.index() as u64, shots);
            let counts = sample_shots(&exact, shots, &mut r)?;
            let rep_ = analyze_distribution(Measured::Sampled(&counts), &ideal, TOP_K, NoiseFloorMode::default())?;
            rows.push(ShotRow {
                preset: pn.preset,
                shots,
                top1_bitstring: rep_.top_k[0].bitstring.clone(),
                top1_probability: rep_.top_k[0].probability,
                entropy_bits: rep_.shannon_entropy_bits,
                top1_uncertainty: rep_.top1_uncertainty.unwrap_or(0.0),
                classical_fidelity: rep_.classical_fidelity,
                exact_entropy_bits: exact_entropy,
                config_hash: hash.clone(),
            });
            for i in 0..exact.probabilities().len() {
                dist_csv.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    pn.preset.name(),
                    shots,
                    bitstring(i, exact.n_qubits()),
                    counts.get(i),
                    counts.frequency(i),
                    exact.probability(i),
                    hash
                ));
            }
        }
    }

    let dist = ratio_source.expect("every preset is evaluated");
    let top = top_k_indices(dist.probabilities(), 1)[0];
    let shots_low = *cfg.shots.iter().min().expect("validated non-empty");
    let shots_high = *cfg.shots.iter().max().expect("validated non-empty");
    let std_low = frequency_std(&dist, top, shots_low, RATIO_SEEDS, cfg.seed)?;
    let std_high = frequency_std(&dist, top, shots_high, RATIO_SEEDS, cfg.seed)?;
    let report = ShotsReport {
        kind: "shots".into(),
        config_hash: hash.clone(),
        data_hash: cfg.data_hash(),
        representative: rep,
        presets,
        rows,
        uncertainty_ratio: UncertaintyRatio {
            preset: cfg.noise_preset,
            outcome: bitstring(top, dist.n_qubits()),
            probability: dist.probability(top),
            shots_low,
            shots_high,
            n_seeds: RATIO_SEEDS,
            std_low,
            std_high,
            empirical_ratio: std_low / std_high,
            analytic_ratio: (shots_high as f64 / shots_low as f64).sqrt(),
            config_hash: hash,
        },
    };

    ensure_out_dir(cfg)?;
    write_json(&cfg.out_path(files::SHOTS), &report)?;
    let mut csv =
        String::from("preset,shots,top1_bitstring,top1_probability,entropy_bits,top1_uncertainty,classical_fidelity,exact_entropy_bits,config_hash\n");
    for r in &report.rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.preset.name(),
            r.shots,
            r.top1_bitstring,
            r.top1_probability,
            r.entropy_bits,
            r.top1_uncertainty,
            r.classical_fidelity,
            r.exact_entropy_bits,
            r.config_hash
        ));
    }
    write_text(&cfg.out_path(files::SHOTS_CSV), &csv)?;
    write_text(&cfg.out_path(files::SHOTS_DISTRIBUTION), &dist_csv)?;
    record_timing(cfg, "shots", started)?;
    Ok(report)
}

// ---------------------------------------------------------------- hw-emulate

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HwRow {
    pub preset: NoisePreset,
    pub target_fidelity: Option<f64>,
    pub noise: NoiseModel,
    /// Metrics of the exact noisy distribution.
    pub classical_fidelity: f64,
    pub entropy_bits: f64,
    pub noise_floor: f64,
    pub top5: Vec<String>,
    /// Outcomes shared with the ideal top five.
    pub top5_overlap: usize,
    /// The same metrics from one finite-shot sample.
    pub sampled_shots: u64,
    pub sampled_fidelity: f64,
    pub sampled_entropy_bits: f64,
    pub sampled_noise_floor: f64,
    pub sampled_top5_overlap: usize,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HwReport {
    pub kind: String,
    pub config_hash: String,
    pub data_hash: String,
    pub representative: Representative,
    pub circuit: CircuitStats,
    pub noise_floor_mode: NoiseFloorMode,
    pub rows: Vec<HwRow>,
}

fn overlap(a: &[String], b: &[String]) -> usize {
    a.iter().filter(|s| b.contains(s)).count()
}

pub fn cmd_hw_emulate(cfg: &ExperimentConfig) -> Result<HwReport> {
    let started = Instant::now();
    cfg.validate()?;
    let (rep, enc) = representative(cfg)?;
    let circuit = reference_circuit(&rep, enc.reps)?;
    let ideal = circuit_distribution(&circuit, &NoiseModel::ideal())?;
    let n = ideal.n_qubits();
    let top = |p: &[f64]| -> Vec<String> { top_k_indices(p, TOP_K).into_iter().map(|i| bitstring(i, n)).collect() };
    let ideal_top = top(ideal.probabilities());
    let shots = *cfg.shots.iter().max().expect("validated non-empty");
    let hash = cfg.hash();
    let mode = NoiseFloorMode::default();

    let rows = [NoisePreset::Ideal, NoisePreset::FezLike, NoisePreset::TorinoLike]
        .iter()
        .map(|&p| {
            let pn = preset_noise(p, &circuit)?;
            let exact = circuit_distribution(&circuit, &pn.noise)?;
            let q = exact.probabilities();
            let mut r = rng::derived_stream(cfg.seed, HW_TAG + p.index() as u64, shots);
            let counts = sample_shots(&exact, shots, &mut r)?;
            let sampled = counts.to_distribution();
            let s = sampled.probabilities();
            let top5 = top(q);
            Ok(HwRow {
                preset: p,
                target_fidelity: pn.target_fidelity,
                noise: pn.noise,
                classical_fidelity: classical_fidelity(q, ideal.probabilities()),
                entropy_bits: shannon_entropy_bits(q),
                noise_floor: noise_floor(q, mode),
                top5_overlap: overlap(&top5, &ideal_top),
                top5,
                sampled_shots: shots,
                sampled_fidelity: classical_fidelity(s, ideal.probabilities()),
                sampled_entropy_bits: shannon_entropy_bits(s),
                sampled_noise_floor: noise_floor(s, mode),
                sampled_top5_overlap: overlap(&top(s), &ideal_top),
                config_hash: hash.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let report = HwReport {
        kind: "hw_emulate".into(),
        config_hash: hash,
        data_hash: cfg.data_hash(),
        representative: rep,
        circuit: circuit.stats(),
        noise_floor_mode: mode,
        rows,
    };

    ensure_out_dir(cfg)?;
    write_json(&cfg.out_path(files::HW_EMULATE), &report)?;
    let mut csv = String::from(
        "preset,p1,p2,readout_flip,classical_fidelity,entropy_bits,noise_floor,top5,top5_overlap,sampled_shots,sampled_fidelity,sampled_entropy_bits,sampled_noise_floor,config_hash\n",
    );
    for r in &report.rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.preset.name(),
            r.noise.p1,
            r.noise.p2,
            r.noise.readout_flip,
            r.classical_fidelity,
            r.entropy_bits,
            r.noise_floor,
            r.top5.join(" "),
            r.top5_overlap,
            r.sampled_shots,
            r.sampled_fidelity,
            r.sampled_entropy_bits,
            r.sampled_noise_floor,
            r.config_hash
        ));
    }
    write_text(&cfg.out_path(files::HW_EMULATE_CSV), &csv)?;
    let uniform = 1.0 / (1u64 << n) as f64;
    let chart = svg::bar_chart(
        "Emulated hardware vs ideal",
        "normalized value",
        &[
            "fidelity".to_string(),
            "entropy / qubits".to_string(),
            "noise floor / uniform".to_string(),
            "top-5 overlap / 5".to_string(),
        ],
        &report
            .rows
            .iter()
            .map(|r| Series {
                name: r.preset.name().into(),
                values: vec![
                    r.classical_fidelity,
                    r.entropy_bits / n as f64,
                    r.noise_floor / uniform,
                    r.top5_overlap as f64 / TOP_K as f64,
                ],
            })
            .collect::<Vec<_>>(),
    );
    write_text(&cfg.out_path(files::HW_EMULATE_SVG), &chart)?;
    record_timing(cfg, "hw-emulate", started)?;
    Ok(report)
}

// ---------------------------------------------------------------- report

const REPORT_SLOTS: [(&str, &str); 4] = [
    ("pca_sweep", files::PCA_SWEEP),
    ("compare", files::METRICS),
    ("shots", files::SHOTS),
    ("hw_emulate", files::HW_EMULATE),
];

/// Merges the four experiment outputs. With no explicit `inputs` the
/// default files under the output directory are used; explicit inputs are
/// matched to tables by their `kind`.
pub fn cmd_report(cfg: &ExperimentConfig, inputs: &[PathBuf]) -> Result<Value> {
    let paths: Vec<PathBuf> = if inputs.is_empty() {
        let defaults: Vec<PathBuf> = REPORT_SLOTS.iter().map(|(_, f)| cfg.out_path(f)).collect();
        require(&defaults)?;
        defaults
    } else {
        require(inputs)?;
        inputs.to_vec()
    };
    let mut tables: BTreeMap<&str, (Value, PathBuf)> = BTreeMap::new();
    for path in paths {
        let v: Value = read_json(&path)?;
        let kind = v.get("kind").and_then(Value::as_str).unwrap_or_default().to_string();
        if kind == "report" {
            return Err(Error::RecursiveReport(path));
        }
        let Some(&(slot, _)) = REPORT_SLOTS.iter().find(|(s, _)| *s == kind) else {
            return Err(Error::Malformed {
                path,
                reason: format!("unrecognized table kind `{kind}`"),
            });
        };
        if tables.contains_key(slot) {
            return Err(Error::Malformed {
                path,
                reason: format!("second `{slot}` input"),
            });
        }
        tables.insert(slot, (v, path));
    }
    let missing: Vec<String> = REPORT_SLOTS
        .iter()
        .filter(|(s, _)| !tables.contains_key(s))
        .map(|(s, f)| format!("{s} ({f})"))
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingInput(missing));
    }
    let hash = tables["compare"].0["config_hash"].as_str().unwrap_or_default().to_string();
    let data_hash = tables["compare"].0["data_hash"].clone();
    for (slot, (v, path)) in &tables {
        if v["data_hash"] != data_hash {
            return Err(Error::Malformed {
                path: path.clone(),
                reason: format!("{slot} table was produced from a different dataset or encoding"),
            });
        }
    }
    let timings_path = cfg.out_path(files::TIMINGS);
    let timings: Value = if timings_path.exists() { read_json(&timings_path)? } else { Value::Null };

    let mut report = serde_json::Map::new();
    report.insert("kind".into(), "report".into());
    report.insert("config_hash".into(), hash.into());
    report.insert("data_hash".into(), data_hash);
    report.insert(
        "config_hashes".into(),
        tables.iter().map(|(slot, (v, _))| ((*slot).to_string(), v["config_hash"].clone())).collect(),
    );
    report.insert(
        "versions".into(),
        serde_json::json!({ "qradar": env!("CARGO_PKG_VERSION") }),
    );
    for (slot, (v, _)) in &tables {
        report.insert((*slot).into(), v.clone());
    }
    report.insert("timings_seconds".into(), timings);
    let report = Value::Object(report);

    ensure_out_dir(cfg)?;
    write_json(&cfg.out_path(files::REPORT), &report)?;
    write_text(&cfg.out_path(files::REPORT_MD), &markdown(&report))?;
    Ok(report)
}

fn pct(v: &Value) -> String {
    v.as_f64().map(|x| format!("{:.2}", 100.0 * x)).unwrap_or_else(|| "".into())
}

fn num(v: &Value, digits: usize) -> String {
    v.as_f64().map(|x| format!("{x:.digits$}")).unwrap_or_else(|| "".into())
}

fn markdown(r: &Value) -> String {
    let mut md = String::from("# qradar experiment report\n\n");
    md.push_str(&format!(
        "Config hash `{}`, qradar {}.\n\n",
        r["config_hash"].as_str().unwrap_or(""),
        r["versions"]["qradar"].as_str().unwrap_or("")
    ));

    md.push_str("## PCA sweep\n\n| k | variance % | accuracy % | Δ accuracy | kernel |\n|---|---|---|---|---|\n");
    for row in r["pca_sweep"]["rows"].as_array().into_iter().flatten() {
        md.push_str(&format!(
            "| {} | {} | {} | {} | {} |\n",
            row["k"],
            pct(&row["cumulative_variance"]),
            pct(&row["accuracy"]),
            if row["delta_accuracy"].is_null() { "".into() } else { pct(&row["delta_accuracy"]) },
            row["kernel"].as_str().unwrap_or("")
        ));
    }

    md.push_str("\n## Classical SVM vs QSVM\n\n| classifier | features | accuracy % | precision % | recall % | F1 % |\n|---|---|---|---|---|---|\n");
    for row in r["compare"]["rows"].as_array().into_iter().flatten() {
        md.push_str(&format!(
            "| {} | {} | {} | {} | {} | {} |\n",
            row["classifier"].as_str().unwrap_or(""),
            row["n_features"],
            pct(&row["accuracy"]),
            pct(&row["precision"]),
            pct(&row["recall"]),
            pct(&row["f1"])
        ));
    }
    md.push_str(&format!(
        "\nAccuracy gap: {} points.\n",
        num(&r["compare"]["accuracy_gap_points"], 2)
    ));

    md.push_str("\n## Shot analysis\n\n| preset | shots | top-1 | probability % | entropy (bits) | ±95% |\n|---|---|---|---|---|---|\n");
    for row in r["shots"]["rows"].as_array().into_iter().flatten() {
        md.push_str(&format!(
            "| {} | {} | {} | {} | {} | {} |\n",
            row["preset"].as_str().unwrap_or(""),
            row["shots"],
            row["top1_bitstring"].as_str().unwrap_or(""),
            pct(&row["top1_probability"]),
            num(&row["entropy_bits"], 3),
            pct(&row["top1_uncertainty"])
        ));
    }
    let u = &r["shots"]["uncertainty_ratio"];
    md.push_str(&format!(
        "\nUncertainty ratio {}→{} shots: empirical {} over {} seeds, analytic {}.\n",
        u["shots_low"],
        u["shots_high"],
        num(&u["empirical_ratio"], 3),
        u["n_seeds"],
        num(&u["analytic_ratio"], 3)
    ));

    md.push_str("\n## Hardware emulation\n\n| preset | p2 | fidelity | entropy (bits) | noise floor % | top-5 overlap |\n|---|---|---|---|---|---|\n");
    for row in r["hw_emulate"]["rows"].as_array().into_iter().flatten() {
        md.push_str(&format!(
            "| {} | {} | {} | {} | {} | {}/5 |\n",
            row["preset"].as_str().unwrap_or(""),
            num(&row["noise"]["p2"], 4),
            num(&row["classical_fidelity"], 4),
            num(&row["entropy_bits"], 3),
            pct(&row["noise_floor"]),
            row["top5_overlap"]
        ));
    }
    if let Some(t) = r["timings_seconds"].as_object() {
        md.push_str("\n## Timings\n\n| command | seconds |\n|---|---|\n");
        for (k, v) in t {
            md.push_str(&format!("| {k} | {} |\n", num(v, 3)));
        }
    }
    md
}

/// Loads the config persisted by `generate` in `dir`.
pub fn load_persisted_config(dir: &Path) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&dir.join(files::CONFIG))?;
    cfg.out_dir = dir.to_path_buf();
    Ok(cfg)
}
