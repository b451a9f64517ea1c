use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Depolarizing rates per gate arity plus symmetric readout flips.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseModel {
    pub p1: f64,
    pub p2: f64,
    pub readout_flip: f64,
}

impl NoiseModel {
    pub fn new(p1: f64, p2: f64, readout_flip: f64) -> Result<Self> {
        let m = NoiseModel { p1, p2, readout_flip };
        m.validate()?;
        Ok(m)
    }

    pub fn ideal() -> Self {
        NoiseModel::default()
    }

    /// One-parameter family used for calibration: `p1 = p2/10`, `readout = p2/2`.
    pub fn from_p2(p2: f64) -> Result<Self> {
        NoiseModel::new(p2 / 10.0, p2, p2 / 2.0)
    }

    pub fn is_ideal(&self) -> bool {
        self.p1 == 0.0 && self.p2 == 0.0 && self.readout_flip == 0.0
    }

    pub fn has_gate_noise(&self) -> bool {
        self.p1 > 0.0 || self.p2 > 0.0
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("p1", self.p1), ("p2", self.p2), ("readout_flip", self.readout_flip)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::ParameterRange {
                    name,
                    value: v,
                    min: 0.0,
                    max: 1.0,
                    context: "noise model".into(),
                });
            }
        }
        Ok(())
    }
}
