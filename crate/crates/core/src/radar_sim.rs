//! Complex-baseband radar returns for rotor, propeller and jet targets.
//!
//! Targets are modelled as point scatterers: a body line at the bulk Doppler
//! `2 v / λ` plus, for rotating targets, scatterers spread along each blade
//! whose radial displacement is `r sin(2π f_rot t + ψ)`. Atmospheric loss,
//! turbulence and receiver noise are applied as separate stages so each one
//! can be tested in isolation.

use std::f64::consts::PI;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::rng::{self, Stream};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Scatterers placed along every blade.
pub const SCATTERERS_PER_BLADE: u32 = 10;
/// Blades on each of the two propellers.
pub const PROPELLER_BLADES: u32 = 3;
pub const PROPELLER_ROTATION_HZ: f64 = 50.0;
pub const PROPELLER_BLADE_LENGTH_M: f64 = 1.5;
/// Phase-modulation index of the jet engine line.
pub const JET_MOD_INDEX: f64 = 0.3;
/// Relative amplitudes of the 2nd and 3rd engine harmonics (-6 dB, -12 dB).
pub const JET_HARMONIC_DB: [f64; 2] = [-6.0, -12.0];
/// Corner frequency of the turbulence processes.
pub const TURBULENCE_CUTOFF_HZ: f64 = 50.0;
/// Upper bound on turbulence intensity drawn during dataset generation.
pub const TURBULENCE_CAP: f64 = 0.3;

// Rotor returns dominate the body line for rotorcraft; before normalization.
const BODY_AMPLITUDE: f64 = 0.3;
const HELICOPTER_BLADE_AMPLITUDE: f64 = 1.0;
const PROPELLER_BLADE_AMPLITUDE: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadarConfig {
    pub carrier_freq: f64,
    pub sample_rate: f64,
    pub duration: f64,
}

impl Default for RadarConfig {
    fn default() -> Self {
        RadarConfig {
            carrier_freq: 9.0e9,
            sample_rate: 1.0e4,
            duration: 0.5,
        }
    }
}

impl RadarConfig {
    /// Wavelength `c / f_c`; derived, never stored.
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_freq
    }

    pub fn sample_count(&self) -> usize {
        (self.sample_rate * self.duration).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("carrier_freq", self.carrier_freq),
            ("sample_rate", self.sample_rate),
            ("duration", self.duration),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, format!("must be positive, got {v}")));
            }
        }
        if self.sample_count() == 0 {
            return Err(Error::invalid("duration", "yields zero samples"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetClass {
    Helicopter,
    Propeller,
    Jet,
}

impl TargetClass {
    pub const ALL: [TargetClass; 3] = [
        TargetClass::Helicopter,
        TargetClass::Propeller,
        TargetClass::Jet,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            TargetClass::Helicopter => "helicopter",
            TargetClass::Propeller => "propeller",
            TargetClass::Jet => "jet",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }

    /// Bulk radial speed range in m/s.
    pub fn velocity_range(self) -> (f64, f64) {
        match self {
            TargetClass::Helicopter => (0.0, 50.0),
            TargetClass::Propeller => (50.0, 120.0),
            TargetClass::Jet => (150.0, 300.0),
        }
    }
}

impl fmt::Display for TargetClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetParams {
    pub class: TargetClass,
    pub body_velocity: f64,
    pub blade_count: u32,
    pub rotation_freq: f64,
    pub blade_length: f64,
    pub engine_mod_freq: f64,
    pub scatterers_per_blade: u32,
}

fn check_range(name: &'static str, value: f64, min: f64, max: f64, class: TargetClass) -> Result<()> {
    if value.is_finite() && (min..=max).contains(&value) {
        Ok(())
    } else {
        Err(Error::ParameterRange {
            name,
            value,
            min,
            max,
            context: class.to_string(),
        })
    }
}

impl TargetParams {
    /// Draws a parameter set uniformly within the class ranges.
    pub fn sample(class: TargetClass, rng: &mut Stream) -> Self {
        let (vmin, vmax) = class.velocity_range();
        let body_velocity = rng.random_range(vmin..=vmax);
        match class {
            TargetClass::Helicopter => TargetParams {
                class,
                body_velocity,
                blade_count: rng.random_range(3..=5),
                rotation_freq: rng.random_range(15.0..=25.0),
                blade_length: rng.random_range(2.5..=4.0),
                engine_mod_freq: 0.0,
                scatterers_per_blade: SCATTERERS_PER_BLADE,
            },
            TargetClass::Propeller => TargetParams {
                class,
                body_velocity,
                blade_count: PROPELLER_BLADES,
                rotation_freq: PROPELLER_ROTATION_HZ,
                blade_length: PROPELLER_BLADE_LENGTH_M,
                engine_mod_freq: 0.0,
                scatterers_per_blade: SCATTERERS_PER_BLADE,
            },
            TargetClass::Jet => TargetParams {
                class,
                body_velocity,
                blade_count: 0,
                rotation_freq: 0.0,
                blade_length: 0.0,
                engine_mod_freq: rng.random_range(80.0..=120.0),
                scatterers_per_blade: SCATTERERS_PER_BLADE,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let class = self.class;
        if self.scatterers_per_blade < 1 {
            return Err(Error::invalid("scatterers_per_blade", "must be at least 1"));
        }
        if !self.body_velocity.is_finite() {
            return Err(Error::invalid("body_velocity", "must be finite"));
        }
        match class {
            TargetClass::Helicopter => {
                check_range("blade_count", self.blade_count as f64, 3.0, 5.0, class)?;
                check_range("rotation_freq", self.rotation_freq, 15.0, 25.0, class)?;
                check_range("blade_length", self.blade_length, 2.5, 4.0, class)?;
            }
            TargetClass::Propeller => {
                let b = PROPELLER_BLADES as f64;
                check_range("blade_count", self.blade_count as f64, b, b, class)?;
                let f = PROPELLER_ROTATION_HZ;
                check_range("rotation_freq", self.rotation_freq, f, f, class)?;
                let l = PROPELLER_BLADE_LENGTH_M;
                check_range("blade_length", self.blade_length, l, l, class)?;
            }
            TargetClass::Jet => {
                check_range("engine_mod_freq", self.engine_mod_freq, 80.0, 120.0, class)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weather {
    Clear,
    LightRain,
    HeavyRain,
    Fog,
}

impl Weather {
    pub const ALL: [Weather; 4] = [
        Weather::Clear,
        Weather::LightRain,
        Weather::HeavyRain,
        Weather::Fog,
    ];

    /// One-way specific attenuation range in dB/km.
    pub fn attenuation_range(self) -> (f64, f64) {
        match self {
            Weather::Clear => (0.0, 0.0),
            Weather::LightRain => (0.5, 2.0),
            Weather::HeavyRain => (5.0, 15.0),
            Weather::Fog => (0.1, 0.5),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Weather::Clear => "clear",
            Weather::LightRain => "light_rain",
            Weather::HeavyRain => "heavy_rain",
            Weather::Fog => "fog",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub weather: Weather,
    pub attenuation_db_per_km: f64,
    pub path_km: f64,
    pub turbulence_intensity: f64,
    pub snr_db: f64,
}

impl Environment {
    /// A clear, turbulence-free path at the given SNR.
    pub fn clear(snr_db: f64) -> Self {
        Environment {
            weather: Weather::Clear,
            attenuation_db_per_km: 0.0,
            path_km: 1.0,
            turbulence_intensity: 0.0,
            snr_db,
        }
    }

    /// Draws the dataset-generation environment: uniform weather, path in
    /// [1, 10] km, turbulence in [0, 0.3], SNR in [5, 15] dB.
    pub fn sample(rng: &mut Stream) -> Self {
        let weather = Weather::ALL[rng.random_range(0..Weather::ALL.len())];
        let (lo, hi) = weather.attenuation_range();
        let attenuation_db_per_km = if hi > lo { rng.random_range(lo..=hi) } else { lo };
        Environment {
            weather,
            attenuation_db_per_km,
            path_km: rng.random_range(1.0..=10.0),
            turbulence_intensity: rng.random_range(0.0..=TURBULENCE_CAP),
            snr_db: rng.random_range(5.0..=15.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.weather.attenuation_range();
        let a = self.attenuation_db_per_km;
        if !(a.is_finite() && a >= lo && a <= hi) {
            return Err(Error::ParameterRange {
                name: "attenuation_db_per_km",
                value: a,
                min: lo,
                max: hi,
                context: self.weather.name().to_string(),
            });
        }
        if !(self.path_km.is_finite() && self.path_km >= 0.0) {
            return Err(Error::invalid("path_km", format!("must be non-negative, got {}", self.path_km)));
        }
        let t = self.turbulence_intensity;
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::ParameterRange {
                name: "turbulence_intensity",
                value: t,
                min: 0.0,
                max: 1.0,
                context: "environment".into(),
            });
        }
        Ok(())
    }
}

/// Sampled complex baseband signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexSignal {
    pub samples: Vec<Complex64>,
    pub sample_rate: f64,
}

impl ComplexSignal {
    pub fn new(samples: Vec<Complex64>, sample_rate: f64) -> Self {
        ComplexSignal {
            samples,
            sample_rate,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean of `|s|²`.
    pub fn mean_power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }

    pub fn is_finite(&self) -> bool {
        self.samples.iter().all(|s| s.re.is_finite() && s.im.is_finite())
    }

    /// Writes the signal as an 8-byte little-endian sample count followed by
    /// interleaved little-endian f64 I/Q pairs.
    pub fn write_iq<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(&(self.samples.len() as u64).to_le_bytes())?;
        for s in &self.samples {
            w.write_all(&s.re.to_le_bytes())?;
            w.write_all(&s.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_iq<R: Read>(mut r: R, sample_rate: f64) -> std::io::Result<Self> {
        let mut header = [0u8; 8];
        r.read_exact(&mut header)?;
        let n = u64::from_le_bytes(header) as usize;
        let mut buf = vec![0u8; n * 16];
        r.read_exact(&mut buf)?;
        let samples = buf
            .chunks_exact(16)
            .map(|c| {
                let re = f64::from_le_bytes(c[..8].try_into().unwrap());
                let im = f64::from_le_bytes(c[8..].try_into().unwrap());
                Complex64::new(re, im)
            })
            .collect();
        Ok(ComplexSignal::new(samples, sample_rate))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(f);
        self.write_iq(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path, sample_rate: f64) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_iq(std::io::BufReader::new(f), sample_rate).map_err(|e| Error::io(path, e))
    }
}

fn rotor_return(
    out: &mut [Complex64],
    fs: f64,
    wavelength: f64,
    blades: u32,
    rotation_freq: f64,
    blade_length: f64,
    scatterers: u32,
    blade_amplitude: f64,
    angle_offset: f64,
    carrier_phase: f64,
) {
    let k = 4.0 * PI / wavelength;
    let amp = blade_amplitude / scatterers as f64;
    let radii: Vec<f64> = (1..=scatterers)
        .map(|m| blade_length * m as f64 / scatterers as f64)
        .collect();
    let omega = 2.0 * PI * rotation_freq;
    for (n, out) in out.iter_mut().enumerate() {
        let t = n as f64 / fs;
        let mut acc = Complex64::new(0.0, 0.0);
        for b in 0..blades {
            let psi = 2.0 * PI * b as f64 / blades as f64 + angle_offset;
            let proj = (omega * t + psi).sin();
            for &r in &radii {
                acc += Complex64::from_polar(amp, k * r * proj + carrier_phase);
            }
        }
        *out += acc;
    }
}

/// Synthesizes the noiseless return of one target, normalized to unit mean power.
///
/// Consumes `rng` only for the nuisance phases (initial rotor angle, propeller
/// relative phase, engine harmonic phases).
pub fn synth_target(config: &RadarConfig, params: &TargetParams, rng: &mut Stream) -> Result<ComplexSignal> {
    config.validate()?;
    params.validate()?;
    let fs = config.sample_rate;
    let n = config.sample_count();
    let lambda = config.wavelength();
    let doppler = 2.0 * params.body_velocity / lambda;

    let mut samples: Vec<Complex64> = (0..n)
        .map(|i| {
            let t = i as f64 / fs;
            Complex64::from_polar(BODY_AMPLITUDE, 2.0 * PI * doppler * t)
        })
        .collect();

    match params.class {
        TargetClass::Helicopter => {
            let offset = rng.random_range(0.0..2.0 * PI);
            rotor_return(
                &mut samples,
                fs,
                lambda,
                params.blade_count,
                params.rotation_freq,
                params.blade_length,
                params.scatterers_per_blade,
                HELICOPTER_BLADE_AMPLITUDE,
                offset,
                0.0,
            );
        }
        TargetClass::Propeller => {
            for prop in 0..2 {
                let offset = rng.random_range(0.0..2.0 * PI);
                let phase = if prop == 0 { 0.0 } else { rng.random_range(0.0..2.0 * PI) };
                rotor_return(
                    &mut samples,
                    fs,
                    lambda,
                    params.blade_count,
                    params.rotation_freq,
                    params.blade_length,
                    params.scatterers_per_blade,
                    PROPELLER_BLADE_AMPLITUDE,
                    offset,
                    phase,
                );
            }
        }
        TargetClass::Jet => {
            let fe = params.engine_mod_freq;
            let rel = [1.0, db_to_amplitude(JET_HARMONIC_DB[0]), db_to_amplitude(JET_HARMONIC_DB[1])];
            let phases: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.0..2.0 * PI));
            for (i, s) in samples.iter_mut().enumerate() {
                let t = i as f64 / fs;
                let pm: f64 = (0..3)
                    .map(|h| rel[h] * (2.0 * PI * (h + 1) as f64 * fe * t + phases[h]).sin())
                    .sum();
                *s *= Complex64::from_polar(1.0, JET_MOD_INDEX * pm);
            }
        }
    }

    let p = samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / n as f64;
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::DegenerateInput("synthesized signal has no power".into()));
    }
    let scale = p.sqrt().recip();
    for s in &mut samples {
        *s *= scale;
    }
    Ok(ComplexSignal::new(samples, fs))
}

fn db_to_amplitude(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}

/// One-way field attenuation `10^(-α R / 20)`.
pub fn apply_weather(signal: &ComplexSignal, env: &Environment) -> Result<ComplexSignal> {
    env.validate()?;
    if env.attenuation_db_per_km == 0.0 {
        return Ok(signal.clone());
    }
    let gain = db_to_amplitude(-env.attenuation_db_per_km * env.path_km);
    Ok(ComplexSignal::new(
        signal.samples.iter().map(|s| s * gain).collect(),
        signal.sample_rate,
    ))
}

/// Unit-variance Gaussian process low-passed by a first-order filter.
fn lowpass_gaussian(n: usize, fs: f64, cutoff: f64, rng: &mut Stream) -> Vec<f64> {
    let alpha = 1.0 - (-2.0 * PI * cutoff / fs).exp();
    // stationary output variance for unit white input is alpha / (2 - alpha)
    let gain = ((2.0 - alpha) / alpha).sqrt();
    let mut y: f64 = rng.sample::<f64, _>(StandardNormal) / gain;
    (0..n)
        .map(|_| {
            let x: f64 = rng.sample(StandardNormal);
            y += alpha * (x - y);
            y * gain
        })
        .collect()
}

/// Multiplies by `(1 + I a(t)) exp(j I φ(t))` with independent low-passed
/// Gaussian amplitude and phase processes.
pub fn apply_turbulence(signal: &ComplexSignal, env: &Environment, rng: &mut Stream) -> Result<ComplexSignal> {
    let intensity = env.turbulence_intensity;
    if !(0.0..=1.0).contains(&intensity) {
        return Err(Error::ParameterRange {
            name: "turbulence_intensity",
            value: intensity,
            min: 0.0,
            max: 1.0,
            context: "turbulence".into(),
        });
    }
    if intensity == 0.0 {
        return Ok(signal.clone());
    }
    let n = signal.len();
    let amp = lowpass_gaussian(n, signal.sample_rate, TURBULENCE_CUTOFF_HZ, rng);
    let phase = lowpass_gaussian(n, signal.sample_rate, TURBULENCE_CUTOFF_HZ, rng);
    let samples = signal
        .samples
        .iter()
        .zip(amp.iter().zip(&phase))
        .map(|(s, (a, p))| s * Complex64::from_polar(1.0 + intensity * a, intensity * p))
        .collect();
    Ok(ComplexSignal::new(samples, signal.sample_rate))
}

/// Adds circular complex Gaussian noise at `snr_db` relative to the measured
/// signal power.
pub fn add_awgn(signal: &ComplexSignal, snr_db: f64, rng: &mut Stream) -> Result<ComplexSignal> {
    if signal.is_empty() {
        return Err(Error::DegenerateInput("cannot add noise to an empty signal".into()));
    }
    if !snr_db.is_finite() {
        return Err(Error::invalid("snr_db", "must be finite"));
    }
    let noise_power = signal.mean_power() / 10f64.powf(snr_db / 10.0);
    let sigma = (noise_power / 2.0).sqrt();
    let samples = signal
        .samples
        .iter()
        .map(|s| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            s + Complex64::new(re * sigma, im * sigma)
        })
        .collect();
    Ok(ComplexSignal::new(samples, signal.sample_rate))
}

/// One generated sample with everything needed to reproduce it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabeledSignal {
    pub class: TargetClass,
    pub params: TargetParams,
    pub env: Environment,
    /// Seed of the stream that produced this sample.
    pub seed: u64,
    pub signal: ComplexSignal,
}

/// Synthesizes one fully degraded sample from its own stream.
pub fn synth_sample(config: &RadarConfig, class: TargetClass, sample_seed: u64) -> Result<LabeledSignal> {
    let mut rng = rng::stream(sample_seed);
    let params = TargetParams::sample(class, &mut rng);
    let env = Environment::sample(&mut rng);
    let clean = synth_target(config, &params, &mut rng)?;
    let attenuated = apply_weather(&clean, &env)?;
    let turbulent = apply_turbulence(&attenuated, &env, &mut rng)?;
    let signal = add_awgn(&turbulent, env.snr_db, &mut rng)?;
    Ok(LabeledSignal {
        class,
        params,
        env,
        seed: sample_seed,
        signal,
    })
}

/// Stream seed of sample `index` of `class` in a dataset drawn with `seed`.
pub fn sample_seed(seed: u64, class: TargetClass, index: usize) -> u64 {
    rng::derive_seed(seed, class.index() as u64, index as u64)
}

/// Generates `n_per_class` samples of every class, class-major order.
pub fn generate_dataset(config: &RadarConfig, n_per_class: usize, seed: u64) -> Result<Vec<LabeledSignal>> {
    if n_per_class == 0 {
        return Err(Error::invalid("n_per_class", "must be at least 1"));
    }
    config.validate()?;
    let total = n_per_class * TargetClass::ALL.len();
    par::map_indices(total, |i| {
        let class = TargetClass::ALL[i / n_per_class];
        synth_sample(config, class, sample_seed(seed, class, i % n_per_class))
    })
    .into_iter()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rustfft::FftPlanner;

    fn heli(rotation_freq: f64, blade_length: f64) -> TargetParams {
        TargetParams {
            class: TargetClass::Helicopter,
            body_velocity: 10.0,
            blade_count: 3,
            rotation_freq,
            blade_length,
            engine_mod_freq: 0.0,
            scatterers_per_blade: 10,
        }
    }

    #[test]
    fn wavelength_is_derived_from_carrier() {
        let c = RadarConfig::default();
        assert!((c.wavelength() * c.carrier_freq / SPEED_OF_LIGHT - 1.0).abs() < 1e-3);
        assert!((c.wavelength() - 0.0333).abs() < 1e-4);
        assert_eq!(c.sample_count(), 5000);
    }

    #[test]
    fn rejects_bad_config() {
        let c = RadarConfig {
            sample_rate: 0.0,
            ..RadarConfig::default()
        };
        let mut rng = rng::stream(1);
        assert!(synth_target(&c, &heli(20.0, 3.0), &mut rng).is_err());
        let c = RadarConfig {
            duration: -1.0,
            ..RadarConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn rejects_out_of_class_parameters() {
        let c = RadarConfig::default();
        let mut rng = rng::stream(1);
        let err = synth_target(&c, &heli(30.0, 3.0), &mut rng).unwrap_err();
        assert!(matches!(err, Error::ParameterRange { name: "rotation_freq", .. }));
        let mut p = heli(20.0, 3.0);
        p.blade_count = 7;
        assert!(synth_target(&c, &p, &mut rng).is_err());
        let mut p = heli(20.0, 3.0);
        p.scatterers_per_blade = 0;
        assert!(synth_target(&c, &p, &mut rng).is_err());
    }

    #[test]
    fn output_power_is_normalized_for_every_class() {
        let c = RadarConfig::default();
        for class in TargetClass::ALL {
            let mut rng = rng::stream(9);
            let p = TargetParams::sample(class, &mut rng);
            let s = synth_target(&c, &p, &mut rng).unwrap();
            assert_eq!(s.len(), c.sample_count());
            assert!(s.is_finite());
            assert!((s.mean_power() - 1.0).abs() < 1e-9, "{class}: {}", s.mean_power());
        }
    }

    #[test]
    fn body_line_sits_at_two_v_over_lambda() {
        // jet with negligible modulation would still carry JEM; use a bare body line
        let c = RadarConfig::default();
        let v = 10.0;
        let fd = 2.0 * v / c.wavelength();
        assert!((fd - 600.6).abs() < 0.5);
        let n = c.sample_count();
        let mut buf: Vec<Complex64> = (0..n)
            .map(|i| Complex64::from_polar(1.0, 2.0 * PI * fd * i as f64 / c.sample_rate))
            .collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let peak = buf
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .unwrap()
            .0;
        let bin = c.sample_rate / n as f64;
        assert!((peak as f64 * bin - fd).abs() <= bin);
    }

    #[test]
    fn tip_scatterer_doppler_matches_analytic_extent() {
        // Single tip scatterer; instantaneous frequency by numeric phase differentiation
        // at a high sample rate so it does not fold.
        let f_rot = 20.0;
        let l = 3.0;
        let c = RadarConfig {
            sample_rate: 2.0e5,
            duration: 0.05,
            ..RadarConfig::default()
        };
        let lambda = c.wavelength();
        let mut out = vec![Complex64::new(0.0, 0.0); c.sample_count()];
        rotor_return(&mut out, c.sample_rate, lambda, 1, f_rot, l, 1, 1.0, 0.0, 0.0);
        let inst: Vec<f64> = out
            .windows(2)
            .map(|w| (w[1] * w[0].conj()).arg() * c.sample_rate / (2.0 * PI))
            .collect();
        let max = inst.iter().cloned().fold(0.0f64, |a, b| a.max(b.abs()));
        let analytic = 2.0 * (2.0 * PI * f_rot * l) / lambda;
        assert!((analytic - 22_640.0).abs() < 50.0, "{analytic}");
        assert!((max - analytic).abs() / analytic < 0.01, "{max} vs {analytic}");
    }

    #[test]
    fn clear_weather_is_identity() {
        let s = ComplexSignal::new(vec![Complex64::new(0.3, -0.2); 16], 1e4);
        let env = Environment {
            path_km: 7.0,
            ..Environment::clear(10.0)
        };
        assert_eq!(apply_weather(&s, &env).unwrap(), s);
    }

    #[test]
    fn ten_db_per_km_over_one_km() {
        let s = ComplexSignal::new(vec![Complex64::new(1.0, 0.0); 8], 1e4);
        let env = Environment {
            weather: Weather::HeavyRain,
            attenuation_db_per_km: 10.0,
            path_km: 1.0,
            turbulence_intensity: 0.0,
            snr_db: 10.0,
        };
        let out = apply_weather(&s, &env).unwrap();
        assert!((out.samples[0].re - 10f64.powf(-0.5)).abs() < 1e-12);
        assert!((out.mean_power() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn sampled_heavy_rain_stays_in_bounds() {
        let s = ComplexSignal::new(vec![Complex64::new(1.0, 0.0); 8], 1e4);
        let mut rng = rng::stream(5);
        let mut seen = 0;
        while seen < 50 {
            let mut env = Environment::sample(&mut rng);
            if env.weather != Weather::HeavyRain {
                continue;
            }
            seen += 1;
            env.path_km = 1.0;
            let ratio = apply_weather(&s, &env).unwrap().mean_power();
            assert!(ratio >= 10f64.powf(-1.5) - 1e-15 && ratio <= 10f64.powf(-0.5) + 1e-15);
        }
    }

    #[test]
    fn weather_rejects_negative_path_and_out_of_range_attenuation() {
        let s = ComplexSignal::new(vec![Complex64::new(1.0, 0.0); 4], 1e4);
        let mut env = Environment::clear(10.0);
        env.path_km = -1.0;
        assert!(apply_weather(&s, &env).is_err());
        let env = Environment {
            weather: Weather::Fog,
            attenuation_db_per_km: 3.0,
            ..Environment::clear(10.0)
        };
        assert!(apply_weather(&s, &env).is_err());
    }

    #[test]
    fn zero_turbulence_is_bit_identical() {
        let mut rng = rng::stream(3);
        let s = synth_target(&RadarConfig::default(), &heli(20.0, 3.0), &mut rng).unwrap();
        let out = apply_turbulence(&s, &Environment::clear(10.0), &mut rng).unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn turbulence_power_stays_bounded() {
        let s = ComplexSignal::new(vec![Complex64::new(1.0, 0.0); 5000], 1e4);
        let env = Environment {
            turbulence_intensity: 0.2,
            ..Environment::clear(10.0)
        };
        for seed in 0..100 {
            let mut rng = rng::stream(seed);
            let p = apply_turbulence(&s, &env, &mut rng).unwrap().mean_power();
            assert!((0.6..=1.7).contains(&p), "seed {seed}: {p}");
        }
    }

    /// Width in bins between the linearly interpolated half-power crossings
    /// on either side of the periodogram peak.
    fn minus_3db_width(signal: &ComplexSignal) -> f64 {
        let n = signal.len();
        let mut buf = signal.samples.clone();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let p: Vec<f64> = buf.iter().map(|c| c.norm_sqr()).collect();
        let k = (0..n).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap();
        let half = p[k] / 2.0;
        let side = |step: isize| {
            let mut prev = k;
            for d in 1..n {
                let i = (k as isize + step * d as isize).rem_euclid(n as isize) as usize;
                if p[i] < half {
                    return (d - 1) as f64 + (p[prev] - half) / (p[prev] - p[i]);
                }
                prev = i;
            }
            n as f64
        };
        side(-1) + side(1)
    }

    #[test]
    fn turbulence_widens_a_tone() {
        let n = 5000;
        let fs = 1e4;
        let tone = ComplexSignal::new(
            (0..n)
                .map(|i| Complex64::from_polar(1.0, 2.0 * PI * 1000.0 * i as f64 / fs))
                .collect(),
            fs,
        );
        let before = minus_3db_width(&tone);
        assert!((before - 1.0).abs() < 1e-9, "{before}");
        for intensity in [0.05, 0.3, 1.0] {
            let env = Environment {
                turbulence_intensity: intensity,
                ..Environment::clear(10.0)
            };
            for seed in 0..20 {
                let out = apply_turbulence(&tone, &env, &mut rng::stream(seed)).unwrap();
                let after = minus_3db_width(&out);
                assert!(after > before, "intensity {intensity} seed {seed}: {after}");
            }
        }
    }

    #[test]
    fn awgn_at_zero_db_has_unit_noise_power() {
        let s = ComplexSignal::new(vec![Complex64::new(1.0, 0.0); 5000], 1e4);
        let out = add_awgn(&s, 0.0, &mut rng::stream(11)).unwrap();
        let noise: f64 = out
            .samples
            .iter()
            .zip(&s.samples)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            / 5000.0;
        assert!((noise - 1.0).abs() < 0.05, "{noise}");
    }

    #[test]
    fn awgn_at_100_db_is_negligible() {
        let mut rng = rng::stream(2);
        let s = synth_target(&RadarConfig::default(), &heli(20.0, 3.0), &mut rng).unwrap();
        let out = add_awgn(&s, 100.0, &mut rng).unwrap();
        let err: f64 = out.samples.iter().zip(&s.samples).map(|(a, b)| (a - b).norm_sqr()).sum();
        let rel = (err / s.samples.iter().map(|x| x.norm_sqr()).sum::<f64>()).sqrt();
        assert!(rel < 1e-4, "{rel}");
    }

    #[test]
    fn awgn_realized_snr_matches_request() {
        let s = ComplexSignal::new(
            (0..5000).map(|i| Complex64::from_polar(1.0, 0.37 * i as f64)).collect(),
            1e4,
        );
        for seed in 0..20 {
            let out = add_awgn(&s, 10.0, &mut rng::stream(seed)).unwrap();
            let noise: f64 = out
                .samples
                .iter()
                .zip(&s.samples)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                / 5000.0;
            let snr = 10.0 * (s.mean_power() / noise).log10();
            assert!((snr - 10.0).abs() < 0.5, "seed {seed}: {snr}");
        }
    }

    #[test]
    fn awgn_rejects_empty_signal() {
        let s = ComplexSignal::new(vec![], 1e4);
        assert!(add_awgn(&s, 10.0, &mut rng::stream(0)).is_err());
    }

    #[test]
    fn dataset_is_balanced_and_deterministic() {
        let c = RadarConfig {
            duration: 0.05,
            ..RadarConfig::default()
        };
        let a = generate_dataset(&c, 4, 42).unwrap();
        assert_eq!(a.len(), 12);
        for class in TargetClass::ALL {
            assert_eq!(a.iter().filter(|s| s.class == class).count(), 4);
        }
        let b = generate_dataset(&c, 4, 42).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.signal, y.signal);
        }
        let d = generate_dataset(&c, 4, 43).unwrap();
        assert!(a.iter().zip(&d).any(|(x, y)| x.signal != y.signal));
        for s in &a {
            s.params.validate().unwrap();
            s.env.validate().unwrap();
            assert!((5.0..=15.0).contains(&s.env.snr_db));
            assert!((1.0..=10.0).contains(&s.env.path_km));
            assert!(s.env.turbulence_intensity <= TURBULENCE_CAP);
        }
        assert!(generate_dataset(&c, 0, 42).is_err());
    }

    #[test]
    fn iq_file_round_trip() {
        let s = ComplexSignal::new(vec![Complex64::new(1.5, -2.25), Complex64::new(0.0, 3.0)], 1e4);
        let mut bytes = Vec::new();
        s.write_iq(&mut bytes).unwrap();
        assert_eq!(bytes.len(), 8 + 2 * 16);
        assert_eq!(&bytes[..8], &2u64.to_le_bytes());
        let back = ComplexSignal::read_iq(&bytes[..], 1e4).unwrap();
        assert_eq!(back, s);
    }
}
