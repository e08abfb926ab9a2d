//! Power spectral densities, lock-in demodulation and swept spectrograms.

mod lockin;
mod spectrogram;

use std::f64::consts::PI;

use rustfft::{num_complex::Complex64, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use lockin::{demodulate, fft_peak, refine_line, LineEstimate};
pub use spectrogram::{
    sweep_spectrogram, sweep_seed, Spectrogram, SpectrogramOptions, SpectrogramRow, SweepParameter,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    #[default]
    Hann,
}

impl Window {
    /// Periodic window of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Hann => (0..n)
                .map(|k| 0.5 - 0.5 * (2.0 * PI * k as f64 / n as f64).cos())
                .collect(),
        }
    }
}

/// One-sided displacement PSD on a uniform grid from 0 to the Nyquist frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdEstimate {
    /// Hz.
    pub frequencies: Vec<f64>,
    /// Units²/Hz.
    pub values: Vec<f64>,
    pub window: Window,
    pub segment_length: usize,
    pub overlap: f64,
    pub segments: usize,
}

impl PsdEstimate {
    pub fn resolution(&self) -> f64 {
        self.frequencies.get(1).copied().unwrap_or(0.0)
    }

    /// ∫PSD df over the whole grid (rectangle rule).
    pub fn total_power(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.resolution()
    }

    /// ∫PSD df over `[lo, hi]` Hz.
    pub fn band_power(&self, lo: f64, hi: f64) -> f64 {
        band_power(&self.frequencies, &self.values, lo, hi)
    }

    /// Index of the largest value inside `[lo, hi]` Hz.
    pub fn peak_in(&self, lo: f64, hi: f64) -> Option<usize> {
        self.frequencies
            .iter()
            .enumerate()
            .filter(|(_, f)| **f >= lo && **f <= hi)
            .max_by(|a, b| self.values[a.0].total_cmp(&self.values[b.0]))
            .map(|(i, _)| i)
    }

    /// Bin index nearest `f` Hz.
    pub fn bin_of(&self, f: f64) -> usize {
        let i = (f / self.resolution()).round().max(0.0) as usize;
        i.min(self.values.len().saturating_sub(1))
    }
}

/// ∫PSD df over `[lo, hi]` Hz on a uniform grid.
pub fn band_power(frequencies: &[f64], values: &[f64], lo: f64, hi: f64) -> f64 {
    let df = if frequencies.len() > 1 { frequencies[1] - frequencies[0] } else { 0.0 };
    frequencies
        .iter()
        .zip(values)
        .filter(|(f, _)| **f >= lo && **f <= hi)
        .map(|(_, v)| v * df)
        .sum()
}

/// Center (Hz) of the strongest peak in `[lo, hi]`: the maximum of a 5-bin
/// running mean, refined by the power centroid within ±`halfwidth` Hz.
pub fn peak_center(frequencies: &[f64], values: &[f64], lo: f64, hi: f64, halfwidth: f64) -> Option<f64> {
    let n = values.len();
    let smooth = |k: usize| {
        let (a, b) = (k.saturating_sub(2), (k + 3).min(n));
        values[a..b].iter().sum::<f64>() / (b - a) as f64
    };
    let k = (0..n)
        .filter(|&k| frequencies[k] >= lo && frequencies[k] <= hi)
        .max_by(|&a, &b| smooth(a).total_cmp(&smooth(b)))?;
    let f0 = frequencies[k];
    let (mut num, mut den) = (0.0, 0.0);
    for (f, v) in frequencies.iter().zip(values) {
        if (f - f0).abs() <= halfwidth {
            num += f * v;
            den += v;
        }
    }
    (den > 0.0).then(|| num / den)
}

/// Welch estimate with Hann windows, mean removal per segment and density
/// scaling, so that the summed PSD times the bin width equals the variance.
pub fn welch_psd(trace: &[f64], sample_rate: f64, segment_length: usize, overlap: f64) -> Result<PsdEstimate> {
    if !(sample_rate > 0.0) || !sample_rate.is_finite() {
        return Err(Error::domain(format!("sample rate must be positive, got {sample_rate}")));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::domain(format!("overlap must lie in [0, 1), got {overlap}")));
    }
    if segment_length < 2 {
        return Err(Error::domain("segment length must be at least 2 samples"));
    }
    if trace.len() < 2 * segment_length {
        return Err(Error::Length(format!(
            "trace of {} samples is shorter than two segments of {segment_length}",
            trace.len()
        )));
    }
    let step = ((segment_length as f64) * (1.0 - overlap)).round().max(1.0) as usize;
    let window = Window::Hann.coefficients(segment_length);
    let norm: f64 = window.iter().map(|w| w * w).sum::<f64>() * sample_rate;
    let fft = FftPlanner::new().plan_fft_forward(segment_length);
    let bins = segment_length / 2 + 1;
    let mut acc = vec![0.0; bins];
    let mut buf = vec![Complex64::new(0.0, 0.0); segment_length];
    let mut segments = 0;
    let mut start = 0;
    while start + segment_length <= trace.len() {
        let seg = &trace[start..start + segment_length];
        let mean = seg.iter().sum::<f64>() / segment_length as f64;
        for (b, (x, w)) in buf.iter_mut().zip(seg.iter().zip(&window)) {
            *b = Complex64::new((x - mean) * w, 0.0);
        }
        fft.process(&mut buf);
        for (a, z) in acc.iter_mut().zip(&buf) {
            *a += z.norm_sqr();
        }
        segments += 1;
        start += step;
    }
    let scale = 1.0 / (norm * segments as f64);
    let nyquist_doubled = segment_length % 2 == 1;
    let values: Vec<f64> = acc
        .iter()
        .enumerate()
        .map(|(k, a)| {
            let one_sided = if k == 0 || (k == bins - 1 && !nyquist_doubled) { 1.0 } else { 2.0 };
            a * scale * one_sided
        })
        .collect();
    let df = sample_rate / segment_length as f64;
    Ok(PsdEstimate {
        frequencies: (0..bins).map(|k| k as f64 * df).collect(),
        values,
        window: Window::Hann,
        segment_length,
        overlap,
        segments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn sine_power_is_half_amplitude_squared() {
        let fs = 1000.0;
        let n = 1024;
        let f0 = 50.0 * fs / n as f64;
        let a = 3.0;
        let x: Vec<f64> = (0..16 * n).map(|k| a * (2.0 * PI * f0 * k as f64 / fs).sin()).collect();
        let psd = welch_psd(&x, fs, n, 0.5).unwrap();
        let p = psd.total_power();
        assert!((p / (a * a / 2.0) - 1.0).abs() < 0.01, "{p}");
        assert_eq!(psd.peak_in(0.0, fs / 2.0), Some(50));
    }

    #[test]
    fn white_noise_level() {
        let fs = 200.0;
        let sigma = 0.7;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = Normal::new(0.0, sigma).unwrap();
        let x: Vec<f64> = (0..200_000).map(|_| d.sample(&mut rng)).collect();
        let psd = welch_psd(&x, fs, 512, 0.5).unwrap();
        let inner = &psd.values[1..psd.values.len() - 1];
        let mean = inner.iter().sum::<f64>() / inner.len() as f64;
        let expect = 2.0 * sigma * sigma / fs;
        assert!((mean / expect - 1.0).abs() < 0.05, "{mean} vs {expect}");
    }

    #[test]
    fn zero_signal() {
        let psd = welch_psd(&vec![0.0; 4096], 10.0, 256, 0.5).unwrap();
        assert!(psd.values.iter().all(|&v| v == 0.0));
        assert_eq!(psd.frequencies.len(), 129);
        assert_eq!(*psd.frequencies.last().unwrap(), 5.0);
    }

    #[test]
    fn short_trace_is_rejected() {
        let err = welch_psd(&[0.0; 100], 10.0, 64, 0.5).unwrap_err();
        assert!(matches!(err, Error::Length(_)));
    }
}
