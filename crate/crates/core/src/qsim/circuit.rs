use std::f64::consts::PI;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest register the simulators accept.
pub const MAX_QUBITS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Gate {
    H(usize),
    /// Phase gate `diag(1, e^{iθ})`.
    P(f64, usize),
    /// `diag(e^{-iθ/2}, e^{iθ/2})`.
    Rz(f64, usize),
    /// Control, target.
    Cx(usize, usize),
}

impl Gate {
    pub fn qubits(&self) -> (usize, Option<usize>) {
        match *self {
            Gate::H(q) | Gate::P(_, q) | Gate::Rz(_, q) => (q, None),
            Gate::Cx(c, t) => (c, Some(t)),
        }
    }

    pub fn arity(&self) -> usize {
        if self.qubits().1.is_some() {
            2
        } else {
            1
        }
    }

    pub fn acts_on(&self, q: usize) -> bool {
        let (a, b) = self.qubits();
        a == q || b == Some(q)
    }

    pub fn inverse(&self) -> Gate {
        match *self {
            Gate::P(t, q) => Gate::P(-t, q),
            Gate::Rz(t, q) => Gate::Rz(-t, q),
            g => g,
        }
    }

    /// Element-wise complex conjugate of the gate matrix.
    pub fn conjugate(&self) -> Gate {
        // H and CX are real; the diagonal phase gates conjugate to their inverse
        self.inverse()
    }

    fn validate(&self, n_qubits: usize) -> Result<()> {
        let (a, b) = self.qubits();
        for q in std::iter::once(a).chain(b) {
            if q >= n_qubits {
                return Err(Error::invalid("qubit", format!("index {q} out of range for {n_qubits} qubits")));
            }
        }
        if b == Some(a) {
            return Err(Error::invalid("qubit", format!("two-qubit gate repeats qubit {a}")));
        }
        if let Gate::P(t, _) | Gate::Rz(t, _) = self {
            if !t.is_finite() {
                return Err(Error::invalid("theta", "rotation angle must be finite"));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Gate::H(q) => write!(f, "H q{q}"),
            Gate::P(t, q) => write!(f, "P {t} q{q}"),
            Gate::Rz(t, q) => write!(f, "RZ {t} q{q}"),
            Gate::Cx(c, t) => write!(f, "CX q{c} q{t}"),
        }
    }
}

fn parse_qubit(tok: &str) -> Option<usize> {
    tok.strip_prefix('q')?.parse().ok()
}

impl FromStr for Gate {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let toks: Vec<&str> = s.split_whitespace().collect();
        let bad = || format!("unrecognised gate line `{s}`");
        match toks.as_slice() {
            ["H", q] => Ok(Gate::H(parse_qubit(q).ok_or_else(bad)?)),
            ["P", t, q] => Ok(Gate::P(t.parse().map_err(|_| bad())?, parse_qubit(q).ok_or_else(bad)?)),
            ["RZ", t, q] => Ok(Gate::Rz(t.parse().map_err(|_| bad())?, parse_qubit(q).ok_or_else(bad)?)),
            ["CX", c, t] => Ok(Gate::Cx(
                parse_qubit(c).ok_or_else(bad)?,
                parse_qubit(t).ok_or_else(bad)?,
            )),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<Gate>,
    /// Whether every qubit is measured at the end.
    pub measured: bool,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::invalid("n_qubits", "must be at least 1"));
        }
        Ok(Circuit {
            n_qubits,
            gates: Vec::new(),
            measured: false,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn push(&mut self, gate: Gate) -> Result<&mut Self> {
        gate.validate(self.n_qubits)?;
        self.gates.push(gate);
        Ok(self)
    }

    /// Appends all gates of `other` (which must have the same width).
    pub fn extend(&mut self, other: &Circuit) -> Result<&mut Self> {
        if other.n_qubits != self.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits,
                actual: other.n_qubits,
            });
        }
        self.gates.extend_from_slice(&other.gates);
        Ok(self)
    }

    /// Exact inverse: reversed gate order, each gate inverted. Drops measurement.
    pub fn inverse(&self) -> Circuit {
        Circuit {
            n_qubits: self.n_qubits,
            gates: self.gates.iter().rev().map(Gate::inverse).collect(),
            measured: false,
        }
    }

    /// Marks every qubit as measured. A measured circuit ends with one barrier
    /// across all qubits followed by the measurements, as measure-all does in
    /// common toolchains.
    pub fn with_measurement(mut self) -> Self {
        self.measured = true;
        self
    }

    /// One gate per line, e.g. `H q0`, `P 1.234 q2`, `CX q0 q1`, followed by
    /// `BARRIER` and `MEASURE qi` lines when measured.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for g in &self.gates {
            let _ = writeln!(s, "{g}");
        }
        if self.measured {
            s.push_str("BARRIER\n");
            for q in 0..self.n_qubits {
                let _ = writeln!(s, "MEASURE q{q}");
            }
        }
        s
    }

    pub fn from_text(n_qubits: usize, text: &str) -> Result<Self> {
        let mut c = Circuit::new(n_qubits)?;
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            if line.starts_with("MEASURE") || line == "BARRIER" {
                c.measured = true;
                continue;
            }
            let g: Gate = line.parse().map_err(|e: String| Error::invalid("circuit", e))?;
            c.push(g)?;
        }
        Ok(c)
    }

    pub fn stats(&self) -> CircuitStats {
        circuit_stats(self)
    }
}

/// ZZ feature map with full pairwise entanglement.
///
/// Per repetition: `H` on every qubit, `P(2 x_i)` on every qubit, then for each
/// pair `i < j`: `CX(i, j)`, `P(2 (π - x_i)(π - x_j))` on `j`, `CX(i, j)`.
pub fn build_zz_feature_map(x: &[f64], reps: usize) -> Result<Circuit> {
    let n = x.len();
    if n < 2 {
        return Err(Error::invalid("x", format!("feature map needs at least 2 qubits, got {n}")));
    }
    if reps == 0 {
        return Err(Error::invalid("reps", "must be at least 1"));
    }
    if let Some(bad) = x.iter().find(|v| !v.is_finite()) {
        return Err(Error::invalid("x", format!("non-finite component {bad}")));
    }
    let mut c = Circuit::new(n)?;
    for _ in 0..reps {
        for q in 0..n {
            c.push(Gate::H(q))?;
        }
        for (q, &xi) in x.iter().enumerate() {
            c.push(Gate::P(2.0 * xi, q))?;
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let phi = (PI - x[i]) * (PI - x[j]);
                c.push(Gate::Cx(i, j))?;
                c.push(Gate::P(2.0 * phi, j))?;
                c.push(Gate::Cx(i, j))?;
            }
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CircuitStats {
    pub h: usize,
    pub p: usize,
    pub rz: usize,
    pub cx: usize,
    pub measure: usize,
    pub barrier: usize,
    /// All operations, barrier and measurements included.
    pub total: usize,
    /// Greedy layering: an operation opens a new layer iff it shares a qubit
    /// with the current one.
    pub depth: usize,
    /// As-soon-as-possible layering, for comparison with other toolchains.
    pub asap_depth: usize,
}

pub fn circuit_stats(c: &Circuit) -> CircuitStats {
    let mut st = CircuitStats::default();
    for g in &c.gates {
        match g {
            Gate::H(_) => st.h += 1,
            Gate::P(..) => st.p += 1,
            Gate::Rz(..) => st.rz += 1,
            Gate::Cx(..) => st.cx += 1,
        }
    }
    // `None` marks the barrier: it synchronises all qubits but is not a layer.
    let mut ops: Vec<Option<(usize, Option<usize>)>> = c.gates.iter().map(|g| Some(g.qubits())).collect();
    if c.measured {
        st.barrier = 1;
        st.measure = c.n_qubits;
        ops.push(None);
        ops.extend((0..c.n_qubits).map(|q| Some((q, None))));
    }
    st.total = ops.len();

    let mut layer: Vec<usize> = Vec::new();
    let mut depth = 0;
    let mut frontier = vec![0usize; c.n_qubits];
    for op in ops {
        let Some((a, b)) = op else {
            layer.clear();
            layer.extend(0..c.n_qubits);
            let top = frontier.iter().copied().max().unwrap_or(0);
            frontier.fill(top);
            continue;
        };
        let qs: Vec<usize> = std::iter::once(a).chain(b).collect();
        if depth == 0 || qs.iter().any(|q| layer.contains(q)) {
            depth += 1;
            layer.clear();
        }
        layer.extend(&qs);

        let level = qs.iter().map(|&q| frontier[q]).max().unwrap_or(0) + 1;
        for &q in &qs {
            frontier[q] = level;
        }
    }
    st.depth = depth;
    st.asap_depth = frontier.into_iter().max().unwrap_or(0);
    st
}
