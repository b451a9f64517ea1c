//! Kernel support vector machines solved by SMO, with one-vs-one multiclass
//! voting and evaluation metrics.

use std::f64::consts::PI;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky_succeeds, jacobi_eigen, min_eigenvalue};
use crate::par;

pub const DEFAULT_C: f64 = 10.0;
pub const DEFAULT_TOL: f64 = 1e-3;
pub const DEFAULT_MAX_ITER: usize = 1_000_000;

/// Floor on the second-order coefficient of a pair update.
const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Gamma {
    Scale,
    Value(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    Rbf { gamma: Gamma },
    Precomputed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    pub c: f64,
    pub kernel: KernelSpec,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            c: DEFAULT_C,
            kernel: KernelSpec::Rbf { gamma: Gamma::Scale },
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

impl SvmConfig {
    pub fn precomputed() -> Self {
        SvmConfig {
            kernel: KernelSpec::Precomputed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) || !self.c.is_finite() {
            return Err(Error::invalid("C", format!("must be positive, got {}", self.c)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid("tol", format!("must be positive, got {}", self.tol)));
        }
        if let KernelSpec::Rbf { gamma: Gamma::Value(g) } = self.kernel {
            if !(g > 0.0) || !g.is_finite() {
                return Err(Error::invalid("gamma", format!("must be positive, got {g}")));
            }
        }
        Ok(())
    }
}

/// `1 / (n_features · var(X))` over all entries of `X`.
pub fn gamma_scale(x: &Array2<f64>) -> Result<f64> {
    let var = x.var(0.0);
    if x.is_empty() || !(var > 0.0) {
        return Err(Error::DegenerateInput("gamma scale needs a matrix with non-zero variance".into()));
    }
    Ok(1.0 / (x.ncols() as f64 * var))
}

/// `exp(-γ ‖x - x'‖²)`.
pub fn rbf_kernel(x: &[f64], xp: &[f64], gamma: f64) -> f64 {
    let d2: f64 = x.iter().zip(xp).map(|(a, b)| (a - b) * (a - b)).sum();
    (-gamma * d2).exp()
}

pub fn rbf_cross(a: &Array2<f64>, b: &Array2<f64>, gamma: f64) -> Array2<f64> {
    let rows = par::map_indices(a.nrows(), |i| {
        let xi = a.row(i).to_vec();
        b.rows().into_iter().map(|r| rbf_kernel(&xi, &r.to_vec(), gamma)).collect::<Vec<_>>()
    });
    Array2::from_shape_vec((a.nrows(), b.nrows()), rows.concat()).expect("row lengths match")
}

pub fn rbf_gram(x: &Array2<f64>, gamma: f64) -> Array2<f64> {
    rbf_cross(x, x, gamma)
}

/// Projects a symmetric matrix onto the PSD cone by clipping negative
/// eigenvalues, then rescales to unit diagonal. Matrices whose smallest
/// eigenvalue is at least `-1e-8` are returned unchanged.
pub fn repair_psd(k: &Array2<f64>) -> Array2<f64> {
    let n = k.nrows();
    let sym = (k + &k.t()) * 0.5;
    if n == 0 || min_eigenvalue(&sym) >= -1e-8 {
        return k.clone();
    }
    let e = jacobi_eigen(&sym);
    let clipped = e.values.mapv(|v| v.max(0.0));
    let mut r = e.vectors.dot(&Array2::from_diag(&clipped)).dot(&e.vectors.t());
    let d: Array1<f64> = r.diag().mapv(|v| if v > 0.0 { 1.0 / v.sqrt() } else { 0.0 });
    for i in 0..n {
        for j in 0..n {
            r[[i, j]] *= d[i] * d[j];
        }
    }
    for i in 0..n {
        r[[i, i]] = 1.0;
        for j in (i + 1)..n {
            let v = 0.5 * (r[[i, j]] + r[[j, i]]);
            r[[i, j]] = v;
            r[[j, i]] = v;
        }
    }
    r
}

/// Solution of one two-class dual problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySvm {
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Whether the kernel had to be projected onto the PSD cone first.
    pub repaired: bool,
    /// Dual objective after every update, starting from `α = 0`.
    #[serde(skip)]
    pub objective_trace: Vec<f64>,
}

impl BinarySvm {
    pub fn dual_coef(&self, y: &[f64]) -> Vec<f64> {
        self.alpha.iter().zip(y).map(|(a, y)| a * y).collect()
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.alpha.len()).filter(|&i| self.alpha[i] > 0.0).collect()
    }

    /// `f(x_i)` for every training point.
    pub fn training_decision(&self, k: &Array2<f64>, y: &[f64]) -> Vec<f64> {
        let coef = Array1::from(self.dual_coef(y));
        (k.dot(&coef) + self.bias).to_vec()
    }

    /// `Σα - ½ αᵀQα`.
    pub fn dual_objective(&self, k: &Array2<f64>, y: &[f64]) -> f64 {
        dual_objective(k, y, &self.alpha)
    }

    /// Largest violation of the KKT conditions in units of `y f(x) - 1`.
    pub fn kkt_violation(&self, k: &Array2<f64>, y: &[f64], c: f64) -> f64 {
        let f = self.training_decision(k, y);
        let mut worst = 0.0f64;
        for i in 0..y.len() {
            let m = y[i] * f[i] - 1.0;
            let a = self.alpha[i];
            let v = if a <= 0.0 {
                (-m).max(0.0)
            } else if a >= c {
                m.max(0.0)
            } else {
                m.abs()
            };
            worst = worst.max(v);
        }
        worst
    }
}

pub fn dual_objective(k: &Array2<f64>, y: &[f64], alpha: &[f64]) -> f64 {
    let n = y.len();
    let mut quad = 0.0;
    for i in 0..n {
        if alpha[i] == 0.0 {
            continue;
        }
        for j in 0..n {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * k[[i, j]];
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

fn check_binary_inputs(k: &Array2<f64>, y: &[f64]) -> Result<()> {
    let n = y.len();
    if k.nrows() != n || k.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: k.nrows(),
        });
    }
    if let Some(bad) = y.iter().find(|&&v| v != 1.0 && v != -1.0) {
        return Err(Error::invalid("y", format!("labels must be ±1, got {bad}")));
    }
    if !(y.contains(&1.0) && y.contains(&-1.0)) {
        return Err(Error::SingleClass);
    }
    if k.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("kernel", "non-finite entry"));
    }
    Ok(())
}

/// Sequential minimal optimization with maximal-violating-pair selection.
///
/// Minimises `½ αᵀQα - Σα` subject to `0 ≤ α ≤ C`, `yᵀα = 0`, with
/// `Q_ij = y_i y_j K_ij`, and stops once the violating-pair gap drops below
/// `tol`.
pub fn train_binary(k: &Array2<f64>, y: &[f64], c: f64, tol: f64, max_iter: usize) -> Result<BinarySvm> {
    check_binary_inputs(k, y)?;
    let repaired = !cholesky_succeeds(k, 1e-8);
    let k = if repaired { repair_psd(k) } else { k.clone() };
    let n = y.len();
    let q = |i: usize, j: usize| y[i] * y[j] * k[[i, j]];

    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let mut trace = vec![0.0];
    let mut iterations = 0;
    let mut converged = false;

    let up = |a: f64, yi: f64| (yi > 0.0 && a < c) || (yi < 0.0 && a > 0.0);
    let low = |a: f64, yi: f64| (yi > 0.0 && a > 0.0) || (yi < 0.0 && a < c);

    while iterations < max_iter {
        let (mut gmax, mut gmin) = (f64::NEG_INFINITY, f64::INFINITY);
        let (mut i, mut j) = (usize::MAX, usize::MAX);
        for t in 0..n {
            let v = -y[t] * grad[t];
            if up(alpha[t], y[t]) && v > gmax {
                gmax = v;
                i = t;
            }
            if low(alpha[t], y[t]) && v < gmin {
                gmin = v;
                j = t;
            }
        }
        if i == usize::MAX || j == usize::MAX || gmax - gmin < tol {
            converged = true;
            break;
        }

        let (ai, aj) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let quad = (q(i, i) + q(j, j) + 2.0 * q(i, j)).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = ai - aj;
            let (mut ni, mut nj) = (ai + delta, aj + delta);
            if diff > 0.0 {
                if nj < 0.0 {
                    nj = 0.0;
                    ni = diff;
                }
            } else if ni < 0.0 {
                ni = 0.0;
                nj = -diff;
            }
            if diff > 0.0 {
                if ni > c {
                    ni = c;
                    nj = c - diff;
                }
            } else if nj > c {
                nj = c;
                ni = c + diff;
            }
            alpha[i] = ni;
            alpha[j] = nj;
        } else {
            let quad = (q(i, i) + q(j, j) - 2.0 * q(i, j)).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = ai + aj;
            let (mut ni, mut nj) = (ai - delta, aj + delta);
            if sum > c {
                if ni > c {
                    ni = c;
                    nj = sum - c;
                }
            } else if nj < 0.0 {
                nj = 0.0;
                ni = sum;
            }
            if sum > c {
                if nj > c {
                    nj = c;
                    ni = sum - c;
                }
            } else if ni < 0.0 {
                ni = 0.0;
                nj = sum;
            }
            alpha[i] = ni;
            alpha[j] = nj;
        }

        let (di, dj) = (alpha[i] - ai, alpha[j] - aj);
        for t in 0..n {
            grad[t] += q(i, t) * di + q(j, t) * dj;
        }
        iterations += 1;
        trace.push(0.5 * alpha.iter().zip(&grad).map(|(a, g)| a * (1.0 - g)).sum::<f64>());
    }

    let bias = -rho(&alpha, &grad, y, c);
    Ok(BinarySvm {
        alpha,
        bias,
        iterations,
        converged,
        repaired,
        objective_trace: trace,
    })
}

/// Offset from free vectors, or the midpoint of the feasible interval when
/// every `α` sits at a bound.
fn rho(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum, mut free) = (0.0, 0usize);
    for i in 0..y.len() {
        let yg = y[i] * grad[i];
        if alpha[i] >= c {
            if y[i] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[i] <= 0.0 {
            if y[i] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            sum += yg;
            free += 1;
        }
    }
    if free > 0 {
        sum / free as f64
    } else {
        0.5 * (ub + lb)
    }
}

/// One binary sub-problem of a one-vs-one model, in terms of the full
/// training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairModel {
    /// Class voted for by a positive decision value.
    pub positive: usize,
    pub negative: usize,
    pub support: Vec<usize>,
    /// `α_i y_i` for each support index.
    pub dual_coef: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    pub converged: bool,
    pub repaired: bool,
    pub kkt_violation: f64,
}

impl PairModel {
    /// `f` for each row of `k_test` (`[n_test × n_train]`).
    pub fn decision(&self, k_test: &Array2<f64>) -> Vec<f64> {
        k_test
            .rows()
            .into_iter()
            .map(|row| self.support.iter().zip(&self.dual_coef).map(|(&s, &w)| w * row[s]).sum::<f64>() + self.bias)
            .collect()
    }
}

/// Kernel actually used by a trained model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResolvedKernel {
    Rbf { gamma: f64 },
    Precomputed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub classes: Vec<usize>,
    pub kernel: ResolvedKernel,
    pub c: f64,
    pub tol: f64,
    pub n_train: usize,
    pub pairs: Vec<PairModel>,
    /// Training rows, kept for RBF prediction.
    pub train_x: Option<Array2<f64>>,
    pub encoding: Option<EncodingScaler>,
}

/// One-vs-one training on a precomputed `[n × n]` Gram matrix.
pub fn train_multiclass_precomputed(k: &Array2<f64>, y: &[usize], config: &SvmConfig) -> Result<SvmModel> {
    config.validate()?;
    let n = y.len();
    if k.nrows() != n || k.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: k.nrows(),
        });
    }
    let mut classes: Vec<usize> = y.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::SingleClass);
    }
    let pair_list: Vec<(usize, usize)> = classes
        .iter()
        .enumerate()
        .flat_map(|(a, &ca)| classes[a + 1..].iter().map(move |&cb| (ca, cb)))
        .collect();
    let pairs = par::map_indices(pair_list.len(), |p| {
        let (pos, neg) = pair_list[p];
        let idx: Vec<usize> = (0..n).filter(|&i| y[i] == pos || y[i] == neg).collect();
        let sub_y: Vec<f64> = idx.iter().map(|&i| if y[i] == pos { 1.0 } else { -1.0 }).collect();
        let sub_k = Array2::from_shape_fn((idx.len(), idx.len()), |(a, b)| k[[idx[a], idx[b]]]);
        let sol = train_binary(&sub_k, &sub_y, config.c, config.tol, config.max_iter)?;
        let kkt_violation = sol.kkt_violation(&if sol.repaired { repair_psd(&sub_k) } else { sub_k }, &sub_y, config.c);
        let sv: Vec<usize> = sol.support();
        Ok(PairModel {
            positive: pos,
            negative: neg,
            support: sv.iter().map(|&s| idx[s]).collect(),
            dual_coef: sv.iter().map(|&s| sol.alpha[s] * sub_y[s]).collect(),
            bias: sol.bias,
            iterations: sol.iterations,
            converged: sol.converged,
            repaired: sol.repaired,
            kkt_violation,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(SvmModel {
        classes,
        kernel: ResolvedKernel::Precomputed,
        c: config.c,
        tol: config.tol,
        n_train: n,
        pairs,
        train_x: None,
        encoding: None,
    })
}

/// One-vs-one training on feature rows with the configured RBF kernel.
pub fn train_multiclass(x: &Array2<f64>, y: &[usize], config: &SvmConfig) -> Result<SvmModel> {
    config.validate()?;
    let gamma = match config.kernel {
        KernelSpec::Rbf { gamma: Gamma::Scale } => gamma_scale(x)?,
        KernelSpec::Rbf { gamma: Gamma::Value(g) } => g,
        KernelSpec::Precomputed => return Err(Error::invalid("kernel", "precomputed kernels need a Gram matrix")),
    };
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            actual: x.nrows(),
        });
    }
    let mut model = train_multiclass_precomputed(&rbf_gram(x, gamma), y, config)?;
    model.kernel = ResolvedKernel::Rbf { gamma };
    model.train_x = Some(x.clone());
    Ok(model)
}

impl SvmModel {
    /// Decision values per pair, `[n_pairs][n_test]`.
    pub fn decision_values(&self, k_test: &Array2<f64>) -> Result<Vec<Vec<f64>>> {
        if k_test.ncols() != self.n_train {
            return Err(Error::DimensionMismatch {
                expected: self.n_train,
                actual: k_test.ncols(),
            });
        }
        Ok(self.pairs.iter().map(|p| p.decision(k_test)).collect())
    }

    /// Majority vote over pairs; ties go to the larger summed decision value,
    /// then to the smaller class label.
    pub fn predict_precomputed(&self, k_test: &Array2<f64>) -> Result<Vec<usize>> {
        let dv = self.decision_values(k_test)?;
        let nc = self.classes.len();
        let pos = |c: usize| self.classes.iter().position(|&x| x == c).expect("known class");
        Ok((0..k_test.nrows())
            .map(|t| {
                let mut votes = vec![0usize; nc];
                let mut score = vec![0.0f64; nc];
                for (p, vals) in self.pairs.iter().zip(&dv) {
                    let f = vals[t];
                    let (a, b) = (pos(p.positive), pos(p.negative));
                    if f > 0.0 {
                        votes[a] += 1;
                    } else {
                        votes[b] += 1;
                    }
                    score[a] += f;
                    score[b] -= f;
                }
                let best = (0..nc)
                    .max_by(|&a, &b| {
                        votes[a]
                            .cmp(&votes[b])
                            .then(score[a].total_cmp(&score[b]))
                            .then(b.cmp(&a))
                    })
                    .expect("at least two classes");
                self.classes[best]
            })
            .collect())
    }

    /// Prediction from feature rows (RBF models only).
    pub fn predict(&self, x_test: &Array2<f64>) -> Result<Vec<usize>> {
        match (self.kernel, &self.train_x) {
            (ResolvedKernel::Rbf { gamma }, Some(train)) => self.predict_precomputed(&rbf_cross(x_test, train, gamma)),
            _ => Err(Error::invalid("kernel", "precomputed models need a test kernel")),
        }
    }

    pub fn max_kkt_violation(&self) -> f64 {
        self.pairs.iter().map(|p| p.kkt_violation).fold(0.0, f64::max)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            source: e,
        })?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            source: e,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    /// Support-weighted averages.
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    /// `confusion[truth][pred]`.
    pub confusion: Vec<Vec<u64>>,
}

impl Metrics {
    pub fn from_confusion(confusion: Vec<Vec<u64>>) -> Self {
        let nc = confusion.len();
        let total: u64 = confusion.iter().flatten().sum();
        let diag: u64 = (0..nc).map(|i| confusion[i][i]).sum();
        let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let (mut p_w, mut r_w, mut f_w) = (0.0, 0.0, 0.0);
        let (mut p_m, mut r_m, mut f_m) = (0.0, 0.0, 0.0);
        for c in 0..nc {
            let tp = confusion[c][c];
            let support: u64 = confusion[c].iter().sum();
            let predicted: u64 = (0..nc).map(|r| confusion[r][c]).sum();
            let p = ratio(tp, predicted);
            let r = ratio(tp, support);
            let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
            let w = ratio(support, total);
            p_w += w * p;
            r_w += w * r;
            f_w += w * f;
            p_m += p / nc as f64;
            r_m += r / nc as f64;
            f_m += f / nc as f64;
        }
        Metrics {
            accuracy: ratio(diag, total),
            precision: p_w,
            recall: r_w,
            f1: f_w,
            macro_precision: p_m,
            macro_recall: r_m,
            macro_f1: f_m,
            confusion,
        }
    }

    pub fn confusion_csv(&self, labels: &[&str]) -> String {
        let mut s = String::from("truth\\pred");
        for l in labels {
            s.push(',');
            s.push_str(l);
        }
        s.push('\n');
        for (i, row) in self.confusion.iter().enumerate() {
            s.push_str(labels.get(i).copied().unwrap_or("?"));
            for v in row {
                s.push_str(&format!(",{v}"));
            }
            s.push('\n');
        }
        s
    }
}

/// Confusion matrix and averaged scores for labels in `0..n_classes`.
pub fn evaluate(pred: &[usize], truth: &[usize], n_classes: usize) -> Result<Metrics> {
    if pred.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            actual: pred.len(),
        });
    }
    if let Some(&bad) = pred.iter().chain(truth).find(|&&l| l >= n_classes) {
        return Err(Error::invalid("labels", format!("label {bad} outside 0..{n_classes}")));
    }
    let mut confusion = vec![vec![0u64; n_classes]; n_classes];
    for (&p, &t) in pred.iter().zip(truth) {
        confusion[t][p] += 1;
    }
    Ok(Metrics::from_confusion(confusion))
}

/// Per-column affine map of the train range onto `[0, π]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingScaler {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

impl EncodingScaler {
    pub fn fit(train: &Array2<f64>) -> Result<Self> {
        let mut mins = Vec::with_capacity(train.ncols());
        let mut maxs = Vec::with_capacity(train.ncols());
        for (j, col) in train.columns().into_iter().enumerate() {
            let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if !(hi > lo) {
                return Err(Error::DegenerateFeature {
                    index: j,
                    name: format!("component {j}"),
                });
            }
            mins.push(lo);
            maxs.push(hi);
        }
        Ok(EncodingScaler { mins, maxs })
    }

    /// Maps into `[0, π]`, clamping values outside the train range.
    pub fn transform(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        self.check(x)?;
        Ok(Array2::from_shape_fn(x.dim(), |(i, j)| {
            (PI * (x[[i, j]] - self.mins[j]) / (self.maxs[j] - self.mins[j])).clamp(0.0, PI)
        }))
    }

    pub fn inverse(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        self.check(x)?;
        Ok(Array2::from_shape_fn(x.dim(), |(i, j)| {
            self.mins[j] + x[[i, j]] / PI * (self.maxs[j] - self.mins[j])
        }))
    }

    fn check(&self, x: &Array2<f64>) -> Result<()> {
        if x.ncols() != self.mins.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mins.len(),
                actual: x.ncols(),
            });
        }
        Ok(())
    }
}

/// Fits the encoding range on `train` and applies it to both matrices.
pub fn scale_for_encoding(train: &Array2<f64>, test: &Array2<f64>) -> Result<(Array2<f64>, Array2<f64>, EncodingScaler)> {
    let s = EncodingScaler::fit(train)?;
    Ok((s.transform(train)?, s.transform(test)?, s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use ndarray::arr2;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn blobs(per_class: usize, spread: f64, seed: u64) -> (Array2<f64>, Vec<usize>) {
        let centres = [[0.0, 0.0], [6.0, 0.0], [0.0, 6.0]];
        let mut r = rng::stream(seed);
        let mut x = Array2::zeros((3 * per_class, 2));
        let mut y = Vec::new();
        for (c, centre) in centres.iter().enumerate() {
            for k in 0..per_class {
                let row = c * per_class + k;
                for d in 0..2 {
                    let z: f64 = r.sample(StandardNormal);
                    x[[row, d]] = centre[d] + spread * z;
                }
                y.push(c);
            }
        }
        (x, y)
    }

    #[test]
    fn gamma_scale_of_standardized_data() {
        let mut r = rng::stream(1);
        let x = Array2::from_shape_fn((400, 15), |_| r.sample::<f64, _>(StandardNormal));
        let z = crate::pca::standardize(&x, &crate::pca::fit_standardizer(&x, None).unwrap()).unwrap();
        assert!((gamma_scale(&z).unwrap() - 1.0 / 15.0).abs() < 1e-12);
        let g = gamma_scale(&x).unwrap();
        assert!((gamma_scale(&(&x * 2.0)).unwrap() - g / 4.0).abs() < 1e-14);
        assert!(gamma_scale(&Array2::from_elem((3, 3), 2.0)).is_err());
    }

    #[test]
    fn gamma_scale_matches_two_pass_variance() {
        let mut r = rng::stream(2);
        let x = Array2::from_shape_fn((37, 5), |_| r.random_range(-3.0..7.0));
        let vals: Vec<f64> = x.iter().cloned().collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / vals.len() as f64;
        assert!((gamma_scale(&x).unwrap() - 1.0 / (5.0 * var)).abs() < 1e-12);
    }

    #[test]
    fn rbf_values() {
        assert_eq!(rbf_kernel(&[1.0, 2.0], &[1.0, 2.0], 0.5), 1.0);
        let gamma = 0.25;
        let v = rbf_kernel(&[0.0, 0.0], &[2.0, 0.0], gamma);
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
        let (x, _) = blobs(4, 1.0, 3);
        let k = rbf_gram(&x.slice(ndarray::s![0..10, ..]).to_owned(), 0.3);
        assert!(crate::linalg::asymmetry(&k) == 0.0);
        assert!(min_eigenvalue(&k) >= -1e-10);
    }

    #[test]
    fn repair_of_indefinite_two_by_two() {
        let k = arr2(&[[1.0, 1.2], [1.2, 1.0]]);
        let r = repair_psd(&k);
        assert!(min_eigenvalue(&r) >= -1e-12);
        assert!((r[[0, 0]] - 1.0).abs() < 1e-15 && (r[[1, 1]] - 1.0).abs() < 1e-15);
        let rr = repair_psd(&r);
        for (a, b) in r.iter().zip(rr.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn repair_leaves_psd_untouched() {
        let (x, _) = blobs(5, 1.0, 4);
        let k = rbf_gram(&x, 0.2);
        assert_eq!(repair_psd(&k), k);
    }

    #[test]
    fn two_point_closed_form() {
        let k = arr2(&[[1.0, -1.0], [-1.0, 1.0]]);
        let y = [1.0, -1.0];
        let s = train_binary(&k, &y, 10.0, 1e-6, 1000).unwrap();
        assert_eq!(s.support(), vec![0, 1]);
        let f = s.training_decision(&k, &y);
        assert!((f[0] - 1.0).abs() < 1e-6 && (f[1] + 1.0).abs() < 1e-6);
        assert!((s.alpha[0] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn single_class_rejected() {
        let k = Array2::eye(3);
        assert!(matches!(train_binary(&k, &[1.0, 1.0, 1.0], 1.0, 1e-3, 10), Err(Error::SingleClass)));
        assert!(matches!(
            train_multiclass_precomputed(&k, &[2, 2, 2], &SvmConfig::precomputed()),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn xor_is_separated() {
        let x = arr2(&[[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]]);
        let y = [1.0, 1.0, -1.0, -1.0];
        let k = rbf_gram(&x, 1.0);
        let s = train_binary(&k, &y, 10.0, 1e-3, 10_000).unwrap();
        let f = s.training_decision(&k, &y);
        assert!(f.iter().zip(&y).all(|(f, y)| f * y > 0.0));
    }

    #[test]
    fn objective_never_decreases() {
        let (x, labels) = blobs(15, 2.5, 5);
        let y: Vec<f64> = labels.iter().map(|&l| if l == 0 { 1.0 } else { -1.0 }).collect();
        let k = rbf_gram(&x, 0.5);
        let s = train_binary(&k, &y, 10.0, 1e-4, 100_000).unwrap();
        assert!(s.converged);
        assert!(s.objective_trace.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        let last = *s.objective_trace.last().unwrap();
        assert!((last - s.dual_objective(&k, &y)).abs() < 1e-8);
    }

    #[test]
    fn kkt_and_constraints_at_convergence() {
        let (x, labels) = blobs(20, 2.5, 6);
        let y: Vec<f64> = labels.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
        let k = rbf_gram(&x, 0.4);
        let c = 10.0;
        let s = train_binary(&k, &y, c, 1e-3, 100_000).unwrap();
        assert!(s.kkt_violation(&k, &y, c) <= 1e-3);
        assert!(s.alpha.iter().all(|&a| (0.0..=c).contains(&a)));
        let eq: f64 = s.alpha.iter().zip(&y).map(|(a, y)| a * y).sum();
        assert!(eq.abs() < 1e-8);
    }

    #[test]
    fn blobs_classified_perfectly() {
        let (x, y) = blobs(30, 0.8, 7);
        let (xt, yt) = blobs(20, 0.8, 8);
        let model = train_multiclass(&x, &y, &SvmConfig::default()).unwrap();
        assert_eq!(model.pairs.len(), 3);
        assert_eq!(model.predict(&x).unwrap(), y);
        let m = evaluate(&model.predict(&xt).unwrap(), &yt, 3).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert!(model.max_kkt_violation() <= 1e-3);
    }

    #[test]
    fn training_order_does_not_change_predictions() {
        let (x, y) = blobs(25, 1.5, 9);
        let (xt, _) = blobs(20, 1.5, 10);
        let base = train_multiclass(&x, &y, &SvmConfig::default()).unwrap().predict(&xt).unwrap();
        let n = y.len();
        let perm: Vec<usize> = (0..n).map(|i| (i * 37 + 11) % n).collect();
        let xp = Array2::from_shape_fn(x.dim(), |(i, j)| x[[perm[i], j]]);
        let yp: Vec<usize> = perm.iter().map(|&i| y[i]).collect();
        let other = train_multiclass(&xp, &yp, &SvmConfig::default()).unwrap().predict(&xt).unwrap();
        assert_eq!(base, other);
    }

    #[test]
    fn prediction_depends_only_on_gram_entries() {
        let (x, y) = blobs(10, 1.5, 11);
        let gamma = gamma_scale(&x).unwrap();
        let rbf = train_multiclass(&x, &y, &SvmConfig::default()).unwrap();
        let pre = train_multiclass_precomputed(&rbf_gram(&x, gamma), &y, &SvmConfig::precomputed()).unwrap();
        let (xt, _) = blobs(6, 1.5, 12);
        assert_eq!(
            rbf.predict(&xt).unwrap(),
            pre.predict_precomputed(&rbf_cross(&xt, &x, gamma)).unwrap()
        );
        assert!(pre.predict(&xt).is_err());
    }

    #[test]
    fn model_json_round_trip() {
        let (x, y) = blobs(8, 1.0, 13);
        let model = train_multiclass(&x, &y, &SvmConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        model.save(&path).unwrap();
        assert_eq!(SvmModel::load(&path).unwrap(), model);
    }

    #[test]
    fn metrics_edge_cases() {
        let truth: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let perfect = evaluate(&truth, &truth, 3).unwrap();
        assert_eq!((perfect.accuracy, perfect.precision, perfect.recall, perfect.f1), (1.0, 1.0, 1.0, 1.0));
        assert_eq!(perfect.confusion, vec![vec![10, 0, 0], vec![0, 10, 0], vec![0, 0, 10]]);
        let constant = evaluate(&vec![1; 30], &truth, 3).unwrap();
        assert!((constant.accuracy - 1.0 / 3.0).abs() < 1e-15);
        assert!(evaluate(&[0, 1], &[0], 3).is_err());
    }

    #[test]
    fn hand_built_confusion() {
        let m = Metrics::from_confusion(vec![vec![50, 0, 0], vec![0, 49, 1], vec![0, 2, 48]]);
        assert!((m.accuracy - 0.98).abs() < 1e-15);
        let p = (1.0 + 49.0 / 51.0 + 48.0 / 49.0) / 3.0;
        assert!((m.precision - p).abs() < 1e-15);
        assert!((m.recall - 0.98).abs() < 1e-15);
        assert!(m.confusion_csv(&["a", "b", "c"]).starts_with("truth\\pred,a,b,c\na,50,0,0\n"));
    }

    #[test]
    fn encoding_affine_and_clamped() {
        let train = arr2(&[[0.0], [5.0], [2.5]]);
        let test = arr2(&[[-1.0], [6.0], [1.25]]);
        let (tr, te, s) = scale_for_encoding(&train, &test).unwrap();
        assert_eq!(tr[[0, 0]], 0.0);
        assert!((tr[[1, 0]] - PI).abs() < 1e-15);
        assert!((tr[[2, 0]] - PI / 2.0).abs() < 1e-15);
        assert_eq!(te[[0, 0]], 0.0);
        assert_eq!(te[[1, 0]], PI);
        let back = s.inverse(&tr).unwrap();
        for (a, b) in back.iter().zip(train.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(EncodingScaler::fit(&arr2(&[[1.0, 2.0], [1.0, 3.0]])).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn box_and_equality_constraints(seed in 0u64..10_000, c in 0.1f64..20.0) {
            let mut r = rng::stream(seed);
            let n = 12;
            let x = Array2::from_shape_fn((n, 3), |_| r.random_range(-2.0..2.0));
            let mut y: Vec<f64> = (0..n).map(|_| if r.random::<bool>() { 1.0 } else { -1.0 }).collect();
            y[0] = 1.0;
            y[1] = -1.0;
            let k = rbf_gram(&x, 0.7);
            let s = train_binary(&k, &y, c, 1e-3, 100_000).unwrap();
            prop_assert!(s.alpha.iter().all(|&a| a >= 0.0 && a <= c));
            let eq: f64 = s.alpha.iter().zip(&y).map(|(a, y)| a * y).sum();
            prop_assert!(eq.abs() < 1e-8);
            prop_assert!(s.kkt_violation(&k, &y, c) <= 1e-3 + 1e-9);
        }

        #[test]
        fn metric_ranges(pred in prop::collection::vec(0usize..3, 1..60), seed in 0u64..100) {
            let mut r = rng::stream(seed);
            let truth: Vec<usize> = pred.iter().map(|_| r.random_range(0..3)).collect();
            let m = evaluate(&pred, &truth, 3).unwrap();
            let trace: u64 = (0..3).map(|i| m.confusion[i][i]).sum();
            prop_assert!((m.accuracy - trace as f64 / pred.len() as f64).abs() < 1e-15);
            for v in [m.accuracy, m.precision, m.recall, m.f1, m.macro_precision, m.macro_recall, m.macro_f1] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}
