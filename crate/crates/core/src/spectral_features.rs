//! STFT spectrograms and the 15-dimensional micro-Doppler feature vector.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radar_sim::ComplexSignal;

pub const DEFAULT_WINDOW: usize = 128;
pub const DEFAULT_HOP: usize = 64;
/// Cumulative-power fraction defining the spectral rolloff.
pub const ROLLOFF_FRACTION: f64 = 0.85;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WindowKind {
    Hann,
    Rectangular,
}

impl WindowKind {
    /// Periodic window of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            WindowKind::Rectangular => vec![1.0; n],
            WindowKind::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
                .collect(),
        }
    }
}

/// Time-frequency magnitudes, `[n_frames × n_bins]`, bins ordered from
/// `-f_s/2` upward.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub magnitudes: Array2<f64>,
    /// Centre time of each frame in seconds.
    pub frame_times: Vec<f64>,
    pub bin_freqs: Vec<f64>,
}

impl Spectrogram {
    pub fn n_frames(&self) -> usize {
        self.magnitudes.nrows()
    }

    pub fn n_bins(&self) -> usize {
        self.magnitudes.ncols()
    }

    pub fn bin_width(&self) -> f64 {
        if self.bin_freqs.len() < 2 {
            0.0
        } else {
            self.bin_freqs[1] - self.bin_freqs[0]
        }
    }
}

/// Hann-windowed STFT.
pub fn stft(signal: &ComplexSignal, window_len: usize, hop: usize) -> Result<Spectrogram> {
    stft_with(signal, window_len, hop, WindowKind::Hann)
}

pub fn stft_with(signal: &ComplexSignal, window_len: usize, hop: usize, window: WindowKind) -> Result<Spectrogram> {
    if window_len == 0 {
        return Err(Error::invalid("window_len", "must be positive"));
    }
    if hop == 0 {
        return Err(Error::invalid("hop", "must be at least 1"));
    }
    if signal.len() < window_len {
        return Err(Error::DegenerateInput(format!(
            "signal of {} samples is shorter than one {window_len}-sample window",
            signal.len()
        )));
    }
    let n_frames = (signal.len() - window_len) / hop + 1;
    let w = window.coefficients(window_len);
    let fft = FftPlanner::new().plan_fft_forward(window_len);
    let half = window_len / 2;
    let mut magnitudes = Array2::zeros((n_frames, window_len));
    let mut buf = vec![Complex64::new(0.0, 0.0); window_len];
    for f in 0..n_frames {
        let start = f * hop;
        for (n, b) in buf.iter_mut().enumerate() {
            *b = signal.samples[start + n] * w[n];
        }
        fft.process(&mut buf);
        // centre: output column c holds FFT bin (c - half) mod N
        let mut row = magnitudes.row_mut(f);
        for (c, m) in row.iter_mut().enumerate() {
            let k = (c + window_len - half) % window_len;
            *m = buf[k].norm();
        }
    }
    let fs = signal.sample_rate;
    let bin_freqs = (0..window_len)
        .map(|c| (c as f64 - half as f64) * fs / window_len as f64)
        .collect();
    let frame_times = (0..n_frames)
        .map(|f| (f * hop) as f64 / fs + window_len as f64 / (2.0 * fs))
        .collect();
    Ok(Spectrogram {
        magnitudes,
        frame_times,
        bin_freqs,
    })
}

/// Number of features in a [`FeatureVector`].
pub const FEATURE_COUNT: usize = 15;

pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "mag_mean",
    "mag_std",
    "mag_skewness",
    "mag_kurtosis",
    "spectral_bandwidth",
    "peak_frequency",
    "centroid_delta_mean",
    "centroid_delta_var",
    "centroid_delta_max",
    "spectral_entropy",
    "spectral_centroid",
    "spectral_rolloff",
    "spectral_flatness",
    "dom_ratio_2",
    "dom_ratio_3",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub mag_mean: f64,
    pub mag_std: f64,
    pub mag_skewness: f64,
    /// Excess (Fisher) kurtosis.
    pub mag_kurtosis: f64,
    pub spectral_bandwidth: f64,
    pub peak_frequency: f64,
    pub centroid_delta_mean: f64,
    pub centroid_delta_var: f64,
    pub centroid_delta_max: f64,
    /// Bits.
    pub spectral_entropy: f64,
    pub spectral_centroid: f64,
    pub spectral_rolloff: f64,
    pub spectral_flatness: f64,
    pub dom_ratio_2: f64,
    pub dom_ratio_3: f64,
}

impl FeatureVector {
    /// Values in [`FEATURE_NAMES`] order.
    pub fn to_array(&self) -> [f64; FEATURE_COUNT] {
        [
            self.mag_mean,
            self.mag_std,
            self.mag_skewness,
            self.mag_kurtosis,
            self.spectral_bandwidth,
            self.peak_frequency,
            self.centroid_delta_mean,
            self.centroid_delta_var,
            self.centroid_delta_max,
            self.spectral_entropy,
            self.spectral_centroid,
            self.spectral_rolloff,
            self.spectral_flatness,
            self.dom_ratio_2,
            self.dom_ratio_3,
        ]
    }

    pub fn from_array(v: [f64; FEATURE_COUNT]) -> Self {
        FeatureVector {
            mag_mean: v[0],
            mag_std: v[1],
            mag_skewness: v[2],
            mag_kurtosis: v[3],
            spectral_bandwidth: v[4],
            peak_frequency: v[5],
            centroid_delta_mean: v[6],
            centroid_delta_var: v[7],
            centroid_delta_max: v[8],
            spectral_entropy: v[9],
            spectral_centroid: v[10],
            spectral_rolloff: v[11],
            spectral_flatness: v[12],
            dom_ratio_2: v[13],
            dom_ratio_3: v[14],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Population mean, std, skewness and excess kurtosis.
fn moments(values: impl Iterator<Item = f64> + Clone) -> (f64, f64, f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in values {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    if m2 <= 0.0 {
        return (mean, 0.0, 0.0, 0.0);
    }
    (mean, m2.sqrt(), m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
}

/// Indices of circular local maxima (strictly above the left neighbour, not
/// below the right one).
fn local_maxima(p: &[f64]) -> Vec<usize> {
    let n = p.len();
    if n < 3 {
        return Vec::new();
    }
    (0..n)
        .filter(|&i| {
            let left = p[(i + n - 1) % n];
            let right = p[(i + 1) % n];
            p[i] > left && p[i] >= right
        })
        .collect()
}

/// Extracts the feature vector from a spectrogram.
pub fn extract_features(spec: &Spectrogram) -> Result<FeatureVector> {
    let (n_frames, n_bins) = spec.magnitudes.dim();
    if n_frames == 0 || n_bins == 0 {
        return Err(Error::DegenerateInput("empty spectrogram".into()));
    }
    if spec.magnitudes.iter().any(|m| !m.is_finite() || *m < 0.0) {
        return Err(Error::DegenerateInput("spectrogram has negative or non-finite magnitudes".into()));
    }
    let freqs = &spec.bin_freqs;

    let (mag_mean, mag_std, mag_skewness, mag_kurtosis) = moments(spec.magnitudes.iter().copied());

    let mut power = vec![0.0; n_bins];
    for row in spec.magnitudes.rows() {
        for (p, m) in power.iter_mut().zip(row) {
            *p += m * m;
        }
    }
    let total: f64 = power.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateInput("all-zero spectrogram has no spectral distribution".into()));
    }
    let p: Vec<f64> = power.iter().map(|v| v / total).collect();

    let centroid: f64 = p.iter().zip(freqs).map(|(p, f)| p * f).sum();
    let bandwidth = p
        .iter()
        .zip(freqs)
        .map(|(p, f)| (f - centroid).powi(2) * p)
        .sum::<f64>()
        .sqrt();
    let peak_idx = p
        .iter()
        .enumerate()
        .fold(0, |best, (i, v)| if *v > p[best] { i } else { best });
    let peak_frequency = freqs[peak_idx];
    let entropy: f64 = -p.iter().filter(|&&v| v > 0.0).map(|v| v * v.log2()).sum::<f64>();

    let mut cum = 0.0;
    let mut rolloff = freqs[n_bins - 1];
    for (v, f) in p.iter().zip(freqs) {
        cum += v;
        if cum >= ROLLOFF_FRACTION {
            rolloff = *f;
            break;
        }
    }

    let arith = 1.0 / n_bins as f64;
    let flatness = if p.iter().any(|&v| v <= 0.0) {
        0.0
    } else {
        let log_mean = p.iter().map(|v| v.ln()).sum::<f64>() / n_bins as f64;
        (log_mean.exp() / arith).clamp(0.0, 1.0)
    };

    // per-frame power-weighted centroid; silent frames repeat the previous value
    let mut trace = Vec::with_capacity(n_frames);
    for row in spec.magnitudes.rows() {
        let e: f64 = row.iter().map(|m| m * m).sum();
        let c = if e > 0.0 {
            row.iter().zip(freqs).map(|(m, f)| m * m * f).sum::<f64>() / e
        } else {
            trace.last().copied().unwrap_or(0.0)
        };
        trace.push(c);
    }
    let deltas: Vec<f64> = trace.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let (delta_mean, delta_var, delta_max) = if deltas.is_empty() {
        (0.0, 0.0, 0.0)
    } else {
        let n = deltas.len() as f64;
        let mean = deltas.iter().sum::<f64>() / n;
        let var = deltas.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n;
        (mean, var, deltas.iter().cloned().fold(0.0, f64::max))
    };

    let mut peaks: Vec<f64> = local_maxima(&p).into_iter().map(|i| p[i]).collect();
    peaks.sort_by(|a, b| b.total_cmp(a));
    let ratio = |k: usize| {
        if peaks.len() > k && peaks[0] > 0.0 {
            peaks[k] / peaks[0]
        } else {
            0.0
        }
    };

    Ok(FeatureVector {
        mag_mean,
        mag_std,
        mag_skewness,
        mag_kurtosis,
        spectral_bandwidth: bandwidth,
        peak_frequency,
        centroid_delta_mean: delta_mean,
        centroid_delta_var: delta_var,
        centroid_delta_max: delta_max,
        spectral_entropy: entropy,
        spectral_centroid: centroid,
        spectral_rolloff: rolloff,
        spectral_flatness: flatness,
        dom_ratio_2: ratio(1),
        dom_ratio_3: ratio(2),
    })
}

/// Default-window STFT followed by feature extraction.
pub fn signal_features(signal: &ComplexSignal) -> Result<FeatureVector> {
    extract_features(&stft(signal, DEFAULT_WINDOW, DEFAULT_HOP)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn tone(freq: f64, n: usize, fs: f64) -> ComplexSignal {
        ComplexSignal::new(
            (0..n)
                .map(|i| Complex64::from_polar(1.0, 2.0 * PI * freq * i as f64 / fs))
                .collect(),
            fs,
        )
    }

    fn white(n: usize, seed: u64) -> ComplexSignal {
        let mut r = rng::stream(seed);
        ComplexSignal::new(
            (0..n)
                .map(|_| Complex64::new(r.sample(StandardNormal), r.sample(StandardNormal)))
                .collect(),
            1e4,
        )
    }

    #[test]
    fn default_geometry() {
        let s = tone(1000.0, 5000, 1e4);
        let spec = stft(&s, 128, 64).unwrap();
        assert_eq!(spec.n_frames(), 77);
        assert_eq!(spec.n_bins(), 128);
        assert_eq!(spec.bin_freqs[0], -5000.0);
        assert!((spec.bin_width() - 78.125).abs() < 1e-12);
        assert!(spec.bin_freqs.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn tone_lands_in_one_bin_every_frame() {
        let s = tone(1000.0, 5000, 1e4);
        let spec = stft(&s, 128, 64).unwrap();
        for row in spec.magnitudes.rows() {
            let (idx, _) = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .unwrap();
            assert!((spec.bin_freqs[idx] - 1000.0).abs() <= spec.bin_width());
        }
    }

    #[test]
    fn zero_signal_gives_zero_magnitudes() {
        let s = ComplexSignal::new(vec![Complex64::new(0.0, 0.0); 512], 1e4);
        let spec = stft(&s, 128, 64).unwrap();
        assert!(spec.magnitudes.iter().all(|&m| m == 0.0));
        assert!(matches!(extract_features(&spec), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn short_signal_rejected() {
        let s = tone(10.0, 100, 1e4);
        assert!(stft(&s, 128, 64).is_err());
        assert!(stft(&tone(10.0, 200, 1e4), 128, 0).is_err());
    }

    #[test]
    fn parseval_with_rectangular_frames() {
        let s = white(5000, 4);
        let n = 128;
        let spec = stft_with(&s, n, n, WindowKind::Rectangular).unwrap();
        let window_energy = n as f64; // Σ w² for the rectangular window
        let stft_energy: f64 = spec.magnitudes.iter().map(|m| m * m).sum::<f64>() / window_energy;
        let covered = spec.n_frames() * n;
        let time_energy: f64 = s.samples[..covered].iter().map(|c| c.norm_sqr()).sum();
        assert!((stft_energy / time_energy - 1.0).abs() < 0.02);
    }

    #[test]
    fn tone_features() {
        let f0 = 1000.0;
        let spec = stft(&tone(f0, 5000, 1e4), 128, 64).unwrap();
        let fv = extract_features(&spec).unwrap();
        let bw = spec.bin_width();
        assert!((fv.peak_frequency - f0).abs() <= bw);
        assert!(fv.spectral_bandwidth <= 2.0 * bw, "{}", fv.spectral_bandwidth);
        assert!(fv.spectral_flatness < 0.01, "{}", fv.spectral_flatness);
        assert!(fv.is_finite());
    }

    #[test]
    fn white_noise_is_flat_and_high_entropy() {
        for seed in 0..10 {
            let spec = stft(&white(5000, seed), 128, 64).unwrap();
            let fv = extract_features(&spec).unwrap();
            assert!(fv.spectral_flatness > 0.5, "{}", fv.spectral_flatness);
            assert!(fv.spectral_entropy > 0.9 * 7.0, "{}", fv.spectral_entropy);
        }
    }

    #[test]
    fn constant_spectrum_is_uniform() {
        let bin_freqs: Vec<f64> = (0..128).map(|c| (c as f64 - 64.0) * 78.125).collect();
        let spec = Spectrogram {
            magnitudes: Array2::from_elem((5, 128), 2.0),
            frame_times: (0..5).map(|i| i as f64).collect(),
            bin_freqs: bin_freqs.clone(),
        };
        let fv = extract_features(&spec).unwrap();
        let mean_f = bin_freqs.iter().sum::<f64>() / 128.0;
        assert!((fv.spectral_centroid - mean_f).abs() < 1e-9);
        assert!((fv.spectral_entropy - 7.0).abs() < 1e-12);
        assert!((fv.spectral_flatness - 1.0).abs() < 1e-12);
        assert_eq!(fv.dom_ratio_2, 0.0);
        assert_eq!(fv.centroid_delta_max, 0.0);
        assert_eq!(fv.mag_std, 0.0);
    }

    #[test]
    fn two_tone_dominance_ratio() {
        let fs = 1e4;
        let s = ComplexSignal::new(
            (0..5000)
                .map(|i| {
                    let t = i as f64 / fs;
                    Complex64::from_polar(1.0, 2.0 * PI * 1000.0 * t)
                        + Complex64::from_polar(0.5, 2.0 * PI * -2500.0 * t)
                })
                .collect(),
            fs,
        );
        let fv = signal_features(&s).unwrap();
        assert!((fv.dom_ratio_2 - 0.25).abs() < 0.02, "{}", fv.dom_ratio_2);
        assert!(fv.dom_ratio_3 <= fv.dom_ratio_2);
    }

    #[test]
    fn array_round_trip_order() {
        let fv = FeatureVector::from_array(std::array::from_fn(|i| i as f64));
        assert_eq!(fv.spectral_entropy, 9.0);
        assert_eq!(fv.to_array()[14], 14.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn scale_covariance(seed in 0u64..1000, scale in 0.01f64..100.0) {
            let mut s = white(1024, seed);
            for (i, c) in s.samples.iter_mut().enumerate() {
                *c += Complex64::from_polar(3.0, 0.9 * i as f64);
            }
            let a = signal_features(&s).unwrap();
            let scaled = ComplexSignal::new(s.samples.iter().map(|c| c * scale).collect(), s.sample_rate);
            let b = signal_features(&scaled).unwrap();
            let close = |x: f64, y: f64| (x - y).abs() <= 1e-7 * (1.0 + x.abs().max(y.abs()));
            prop_assert_eq!(a.peak_frequency, b.peak_frequency);
            prop_assert!(close(a.spectral_centroid, b.spectral_centroid));
            prop_assert!(close(a.spectral_bandwidth, b.spectral_bandwidth));
            prop_assert!(close(a.spectral_entropy, b.spectral_entropy));
            prop_assert!(close(a.spectral_flatness, b.spectral_flatness));
            prop_assert!(close(a.spectral_rolloff, b.spectral_rolloff));
            prop_assert!(close(a.dom_ratio_2, b.dom_ratio_2));
            prop_assert!(close(a.dom_ratio_3, b.dom_ratio_3));
            prop_assert!(close(a.centroid_delta_mean, b.centroid_delta_mean));
            prop_assert!(close(a.centroid_delta_var, b.centroid_delta_var));
            prop_assert!(close(a.centroid_delta_max, b.centroid_delta_max));
            prop_assert!(close(a.mag_mean * scale, b.mag_mean));
            prop_assert!(close(a.mag_std * scale, b.mag_std));
            prop_assert!(close(a.mag_skewness, b.mag_skewness));
            prop_assert!(close(a.mag_kurtosis, b.mag_kurtosis));
        }

        #[test]
        fn feature_invariants(seed in 0u64..1000, amp in 0.0f64..5.0, f in -4000.0f64..4000.0) {
            let mut s = white(2048, seed);
            for (i, c) in s.samples.iter_mut().enumerate() {
                *c += Complex64::from_polar(amp, 2.0 * PI * f * i as f64 / 1e4);
            }
            let spec = stft(&s, 128, 64).unwrap();
            let fv = extract_features(&spec).unwrap();
            prop_assert!(fv.is_finite());
            prop_assert!((0.0..=1.0).contains(&fv.spectral_flatness));
            prop_assert!((0.0..=1.0).contains(&fv.dom_ratio_2));
            prop_assert!((0.0..=1.0).contains(&fv.dom_ratio_3));
            prop_assert!(fv.dom_ratio_3 <= fv.dom_ratio_2);
            prop_assert!(fv.spectral_entropy >= 0.0 && fv.spectral_entropy <= 7.0 + 1e-12);
        }
    }
}
