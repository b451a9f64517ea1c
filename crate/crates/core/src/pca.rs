//! Z-score standardization and principal component analysis.

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::jacobi_eigen;

/// Per-column mean and population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Array1<f64>,
    pub stds: Array1<f64>,
}

/// Fits column statistics. `names` is only used to label errors.
pub fn fit_standardizer(x: &Array2<f64>, names: Option<&[&str]>) -> Result<Standardizer> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::DegenerateInput(format!("standardizer needs at least 2 rows, got {n}")));
    }
    let means = x.mean_axis(Axis(0)).expect("non-empty");
    let stds = x.std_axis(Axis(0), 0.0);
    for (i, s) in stds.iter().enumerate() {
        if !(*s > 0.0) || !s.is_finite() {
            let name = names
                .and_then(|n| n.get(i))
                .map(|s| s.to_string())
                .unwrap_or_else(|| format!("column {i}"));
            return Err(Error::DegenerateFeature { index: i, name });
        }
    }
    Ok(Standardizer { means, stds })
}

impl Standardizer {
    pub fn transform(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.means.len() {
            return Err(Error::DimensionMismatch {
                expected: self.means.len(),
                actual: x.ncols(),
            });
        }
        Ok((x - &self.means) / &self.stds)
    }
}

pub fn standardize(x: &Array2<f64>, s: &Standardizer) -> Result<Array2<f64>> {
    s.transform(x)
}

/// Top-`k` principal axes of the sample covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    /// `[k × d]`, orthonormal rows.
    pub components: Array2<f64>,
    pub eigenvalues: Array1<f64>,
    pub explained_variance_ratio: Array1<f64>,
}

impl PcaModel {
    pub fn n_components(&self) -> usize {
        self.components.nrows()
    }

    pub fn cumulative_variance(&self) -> f64 {
        self.explained_variance_ratio.sum()
    }

    pub fn project(&self, x_std: &Array2<f64>) -> Result<Array2<f64>> {
        if x_std.ncols() != self.components.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.components.ncols(),
                actual: x_std.ncols(),
            });
        }
        Ok(x_std.dot(&self.components.t()))
    }
}

/// Sample (n - 1) covariance of the columns of `x`.
pub fn covariance(x: &Array2<f64>) -> Array2<f64> {
    let n = x.nrows();
    let mean = x.mean_axis(Axis(0)).expect("non-empty");
    let centered = x - &mean;
    centered.t().dot(&centered) / (n as f64 - 1.0)
}

pub fn fit_pca(x_std: &Array2<f64>, k: usize) -> Result<PcaModel> {
    let d = x_std.ncols();
    if k < 1 || k > d {
        return Err(Error::ParameterRange {
            name: "k",
            value: k as f64,
            min: 1.0,
            max: d as f64,
            context: "pca".into(),
        });
    }
    if x_std.nrows() < 2 {
        return Err(Error::DegenerateInput("pca needs at least 2 rows".into()));
    }
    let cov = covariance(x_std);
    let trace = cov.diag().sum();
    if !(trace > 0.0) {
        return Err(Error::DegenerateInput("pca input has zero total variance".into()));
    }
    let eig = jacobi_eigen(&cov);
    let mut components = Array2::zeros((k, d));
    for i in 0..k {
        let mut v = eig.vectors.column(i).to_owned();
        // sign convention: largest-magnitude entry positive
        let lead = v
            .iter()
            .enumerate()
            .fold(0, |best, (j, x)| if x.abs() > v[best].abs() { j } else { best });
        if v[lead] < 0.0 {
            v.mapv_inplace(|x| -x);
        }
        components.row_mut(i).assign(&v);
    }
    let eigenvalues = eig.values.slice(ndarray::s![..k]).mapv(|l| l.max(0.0));
    let explained_variance_ratio = eigenvalues.mapv(|l| l / trace);
    Ok(PcaModel {
        components,
        eigenvalues,
        explained_variance_ratio,
    })
}

pub fn project(x_std: &Array2<f64>, model: &PcaModel) -> Result<Array2<f64>> {
    model.project(x_std)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: usize,
    pub cumulative_variance: f64,
    pub accuracy: f64,
}

/// For each `k`, fits PCA on `train`, trains through `classify` on the
/// projected data and scores the returned test predictions.
///
/// `classify(k, train_proj, train_labels, test_proj)` returns one predicted
/// label per test row.
pub fn pca_sweep<F>(
    train: &Array2<f64>,
    train_labels: &[usize],
    test: &Array2<f64>,
    test_labels: &[usize],
    k_range: impl IntoIterator<Item = usize>,
    mut classify: F,
) -> Result<Vec<SweepRow>>
where
    F: FnMut(usize, &Array2<f64>, &[usize], &Array2<f64>) -> Result<Vec<usize>>,
{
    let mut rows = Vec::new();
    for k in k_range {
        if !(2..=12).contains(&k) {
            return Err(Error::ParameterRange {
                name: "k",
                value: k as f64,
                min: 2.0,
                max: 12.0,
                context: "pca sweep".into(),
            });
        }
        let model = fit_pca(train, k)?;
        let tr = model.project(train)?;
        let te = model.project(test)?;
        let pred = classify(k, &tr, train_labels, &te)?;
        if pred.len() != test_labels.len() {
            return Err(Error::DimensionMismatch {
                expected: test_labels.len(),
                actual: pred.len(),
            });
        }
        let correct = pred.iter().zip(test_labels).filter(|(a, b)| a == b).count();
        rows.push(SweepRow {
            k,
            cumulative_variance: model.cumulative_variance(),
            accuracy: correct as f64 / test_labels.len().max(1) as f64,
        });
    }
    Ok(rows)
}
