use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::qsim::MAX_QUBITS;

/// Emulated hardware noise level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoisePreset {
    Ideal,
    TorinoLike,
    FezLike,
}

impl NoisePreset {
    pub const ALL: [NoisePreset; 3] = [NoisePreset::Ideal, NoisePreset::TorinoLike, NoisePreset::FezLike];

    /// Classical fidelity the preset is calibrated to.
    pub fn target_fidelity(self) -> Option<f64> {
        match self {
            NoisePreset::Ideal => None,
            NoisePreset::TorinoLike => Some(0.89),
            NoisePreset::FezLike => Some(0.94),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            NoisePreset::Ideal => "ideal",
            NoisePreset::TorinoLike => "torino-like",
            NoisePreset::FezLike => "fez-like",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl std::str::FromStr for NoisePreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        NoisePreset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::invalid("noise_preset", format!("unknown preset `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub n_per_class: usize,
    /// Training fraction of each class.
    pub split: f64,
    pub qubits: usize,
    pub reps: usize,
    pub shots: Vec<u64>,
    pub noise_preset: NoisePreset,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 42,
            n_per_class: 150,
            split: 0.7,
            qubits: 4,
            reps: 2,
            shots: vec![1024, 4096, 8096],
            noise_preset: NoisePreset::Ideal,
            out_dir: PathBuf::from("out"),
        }
    }
}

/// Fields that determine results; the output directory is excluded.
#[derive(Serialize)]
struct HashView<'a> {
    seed: u64,
    n_per_class: usize,
    split: f64,
    qubits: usize,
    reps: usize,
    shots: &'a [u64],
    noise_preset: NoisePreset,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.split > 0.0 && self.split < 1.0) {
            return Err(Error::ParameterRange {
                name: "split",
                value: self.split,
                min: 0.0,
                max: 1.0,
                context: "experiment config (exclusive bounds)".into(),
            });
        }
        if !(2..=MAX_QUBITS).contains(&self.qubits) {
            return Err(Error::ParameterRange {
                name: "qubits",
                value: self.qubits as f64,
                min: 2.0,
                max: MAX_QUBITS as f64,
                context: "experiment config".into(),
            });
        }
        if self.n_per_class < 2 {
            return Err(Error::invalid("n_per_class", "need at least 2 samples per class"));
        }
        if self.reps == 0 {
            return Err(Error::invalid("reps", "must be at least 1"));
        }
        if self.shots.is_empty() || self.shots.contains(&0) {
            return Err(Error::invalid("shots", "need at least one shot count, each ≥ 1"));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            source: e,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Hex SHA-256 of the fields that fix the dataset, split and encoding,
    /// so that shot and noise settings can vary over one trained encoding.
    pub fn data_hash(&self) -> String {
        sha256_json(&(self.seed, self.n_per_class, self.split, self.qubits, self.reps))
    }

    /// Hex SHA-256 of the canonical JSON of every result-relevant field.
    pub fn hash(&self) -> String {
        let view = HashView {
            seed: self.seed,
            n_per_class: self.n_per_class,
            split: self.split,
            qubits: self.qubits,
            reps: self.reps,
            shots: &self.shots,
            noise_preset: self.noise_preset,
        };
        sha256_json(&view)
    }

    pub fn out_path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

fn sha256_json<T: Serialize>(value: &T) -> String {
    let canonical = serde_json::to_vec(value).expect("plain data serializes");
    Sha256::digest(&canonical).iter().map(|b| format!("{b:02x}")).collect()
}
