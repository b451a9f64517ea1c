use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radar_sim::{self, RadarConfig, TargetClass, Weather};
use crate::spectral_features::{signal_features, FEATURE_COUNT, FEATURE_NAMES};
use crate::{par, rng};

/// Stream tag for the split shuffles, disjoint from the per-class sample tags.
const SPLIT_TAG: u64 = 99;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub label: TargetClass,
    pub snr_db: f64,
    pub weather: Weather,
    pub seed: u64,
}

/// Feature matrix plus the origin of each row, class-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
    pub records: Vec<SampleRecord>,
}

/// Synthesizes and featurizes the dataset, optionally saving each signal as
/// an `.iq` file under `signal_dir`.
pub fn build_dataset(radar: &RadarConfig, n_per_class: usize, seed: u64, signal_dir: Option<&Path>) -> Result<Dataset> {
    if n_per_class == 0 {
        return Err(Error::invalid("n_per_class", "must be at least 1"));
    }
    radar.validate()?;
    if let Some(dir) = signal_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let total = n_per_class * TargetClass::ALL.len();
    let rows = par::map_indices(total, |i| -> Result<([f64; FEATURE_COUNT], SampleRecord)> {
        let class = TargetClass::ALL[i / n_per_class];
        let s = radar_sim::synth_sample(radar, class, radar_sim::sample_seed(seed, class, i % n_per_class))?;
        if let Some(dir) = signal_dir {
            s.signal.save(&dir.join(signal_file_name(i)))?;
        }
        let f = signal_features(&s.signal)?.to_array();
        let rec = SampleRecord {
            label: class,
            snr_db: s.env.snr_db,
            weather: s.env.weather,
            seed: s.seed,
        };
        Ok((f, rec))
    });
    let mut features = Array2::zeros((total, FEATURE_COUNT));
    let mut labels = Vec::with_capacity(total);
    let mut records = Vec::with_capacity(total);
    for (i, row) in rows.into_iter().enumerate() {
        let (f, rec) = row?;
        features.row_mut(i).assign(&ndarray::ArrayView1::from(&f));
        labels.push(rec.label.index());
        records.push(rec);
    }
    Ok(Dataset { features, labels, records })
}

pub fn signal_file_name(i: usize) -> String {
    format!("sample_{i:04}.iq")
}

/// Train/test row indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Per class, shuffles its rows with a derived stream and sends the first
/// `round(n_c · train_fraction)` to train. Both halves stay class-major.
pub fn stratified_split(labels: &[usize], n_classes: usize, train_fraction: f64, seed: u64) -> Result<Split> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::ParameterRange {
            name: "split",
            value: train_fraction,
            min: 0.0,
            max: 1.0,
            context: "stratified split (exclusive bounds)".into(),
        });
    }
    let mut split = Split { train: Vec::new(), test: Vec::new() };
    for c in 0..n_classes {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        idx.shuffle(&mut rng::derived_stream(seed, SPLIT_TAG, c as u64));
        let n_train = (idx.len() as f64 * train_fraction).round() as usize;
        split.train.extend_from_slice(&idx[..n_train]);
        split.test.extend_from_slice(&idx[n_train..]);
    }
    Ok(split)
}

impl Split {
    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }
}

/// `features.csv`: the feature names, then `label` holding the class name.
pub fn write_features_csv(path: &Path, features: &Array2<f64>, labels: &[usize]) -> Result<()> {
    let io = |e: csv::Error| csv_error(path, e);
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(FEATURE_NAMES.iter().copied().chain(["label"])).map_err(io)?;
    for (row, &l) in features.rows().into_iter().zip(labels) {
        let class = TargetClass::from_index(l).ok_or_else(|| Error::invalid("labels", format!("label {l} out of range")))?;
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        rec.push(class.name().to_string());
        w.write_record(&rec).map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_features_csv(path: &Path) -> Result<(Array2<f64>, Vec<usize>)> {
    let io = |e: csv::Error| csv_error(path, e);
    let malformed = |reason: String| Error::Malformed { path: path.to_path_buf(), reason };
    let mut r = csv::Reader::from_path(path).map_err(io)?;
    let header = r.headers().map_err(io)?.clone();
    let expected: Vec<&str> = FEATURE_NAMES.iter().copied().chain(["label"]).collect();
    if header.iter().collect::<Vec<_>>() != expected {
        return Err(malformed("header does not match the feature schema".into()));
    }
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(io)?;
        for field in rec.iter().take(FEATURE_COUNT) {
            values.push(
                field
                    .parse::<f64>()
                    .map_err(|_| malformed(format!("row {}: bad number `{field}`", line + 1)))?,
            );
        }
        let name = &rec[FEATURE_COUNT];
        let class = TargetClass::from_name(name).ok_or_else(|| malformed(format!("row {}: unknown label `{name}`", line + 1)))?;
        labels.push(class.index());
    }
    let features = Array2::from_shape_vec((labels.len(), FEATURE_COUNT), values).map_err(|e| malformed(e.to_string()))?;
    Ok((features, labels))
}

/// `manifest.csv` with columns `path,label,snr_db,weather,seed`; `path` is
/// empty when signals were not saved.
pub fn write_manifest(path: &Path, records: &[SampleRecord], signal_dir: Option<&Path>) -> Result<()> {
    let io = |e: csv::Error| csv_error(path, e);
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(["path", "label", "snr_db", "weather", "seed"]).map_err(io)?;
    for (i, r) in records.iter().enumerate() {
        let file = signal_dir
            .map(|d| d.join(signal_file_name(i)).to_string_lossy().into_owned())
            .unwrap_or_default();
        w.write_record([
            file,
            r.label.name().to_string(),
            r.snr_db.to_string(),
            r.weather.name().to_string(),
            r.seed.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::io(path, e),
        other => Error::Malformed {
            path: path.to_path_buf(),
            reason: format!("{other:?}"),
        },
    }
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Fails with [`Error::MissingInput`] naming every absent file.
pub fn require(paths: &[PathBuf]) -> Result<()> {
    let missing: Vec<String> = paths
        .iter()
        .filter(|p| !p.exists())
        .map(|p| p.display().to_string())
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::MissingInput(missing))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_is_stratified() {
        let labels: Vec<usize> = (0..3).flat_map(|c| std::iter::repeat_n(c, 150)).collect();
        let s = stratified_split(&labels, 3, 0.7, 42).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (315, 135));
        for c in 0..3 {
            assert_eq!(s.train.iter().filter(|&&i| labels[i] == c).count(), 105);
            assert_eq!(s.test.iter().filter(|&&i| labels[i] == c).count(), 45);
        }
        let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..450).collect::<Vec<_>>());
        assert_eq!(s, stratified_split(&labels, 3, 0.7, 42).unwrap());
        assert_ne!(s, stratified_split(&labels, 3, 0.7, 43).unwrap());
    }

    #[test]
    fn uneven_classes_round_per_class() {
        let labels = [0, 0, 0, 1, 1, 1, 1, 1, 2];
        let s = stratified_split(&labels, 3, 0.5, 1).unwrap();
        let count = |set: &[usize], c| set.iter().filter(|&&i| labels[i] == c).count();
        assert_eq!(count(&s.train, 0), 2);
        assert_eq!(count(&s.train, 1), 3);
        assert_eq!(count(&s.train, 2), 1);
        assert!(stratified_split(&labels, 3, 1.0, 1).is_err());
    }

    #[test]
    fn features_csv_round_trips_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        let x = Array2::from_shape_fn((3, FEATURE_COUNT), |(i, j)| (i as f64 + 0.1) / (j as f64 + 3.0) * 1e-3);
        write_features_csv(&path, &x, &[0, 1, 2]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.lines().next().unwrap().ends_with(",label"));
        assert!(text.lines().nth(2).unwrap().ends_with(",propeller"));
        let (y, l) = read_features_csv(&path).unwrap();
        assert_eq!(y, x);
        assert_eq!(l, vec![0, 1, 2]);
    }

    #[test]
    fn malformed_features_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        std::fs::write(&path, "a,b\n1,2\n").unwrap();
        assert_eq!(read_features_csv(&path).unwrap_err().kind(), "malformed");
        assert_eq!(read_features_csv(&dir.path().join("none.csv")).unwrap_err().kind(), "io");
    }

    #[test]
    fn small_dataset_with_signals_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let sig = dir.path().join("signals");
        let radar = RadarConfig::default();
        let d = build_dataset(&radar, 2, 5, Some(&sig)).unwrap();
        assert_eq!(d.features.nrows(), 6);
        assert_eq!(d.labels, vec![0, 0, 1, 1, 2, 2]);
        let again = build_dataset(&radar, 2, 5, None).unwrap();
        assert_eq!(again, d);
        let reloaded = radar_sim::ComplexSignal::load(&sig.join(signal_file_name(3)), radar.sample_rate).unwrap();
        let f = signal_features(&reloaded).unwrap().to_array();
        assert_eq!(f.to_vec(), d.features.row(3).to_vec());

        let m = dir.path().join("manifest.csv");
        write_manifest(&m, &d.records, Some(&sig)).unwrap();
        let text = std::fs::read_to_string(&m).unwrap();
        assert!(text.starts_with("path,label,snr_db,weather,seed\n"));
        assert_eq!(text.lines().count(), 7);
    }

    #[test]
    fn require_lists_every_missing_file() {
        let dir = tempfile::tempdir().unwrap();
        let present = dir.path().join("a");
        std::fs::write(&present, "").unwrap();
        let err = require(&[present, dir.path().join("b"), dir.path().join("c")]).unwrap_err();
        match err {
            Error::MissingInput(v) => assert_eq!(v.len(), 2),
            other => panic!("{other:?}"),
        }
    }
}
