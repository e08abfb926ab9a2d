//! Single-frequency demodulation of sampled traces.

use std::f64::consts::PI;

use rustfft::{num_complex::Complex64, FftPlanner};

use super::Window;
use crate::error::{Error, Result};

/// Complex amplitude C of the component Re(C e^{iωt}) of `trace`, from a
/// Hann-weighted lock-in. Sample k sits at time `t0 + k/sample_rate`.
pub fn demodulate(trace: &[f64], sample_rate: f64, t0: f64, omega: f64) -> Complex64 {
    let n = trace.len();
    if n == 0 {
        return Complex64::new(0.0, 0.0);
    }
    let w = Window::Hann.coefficients(n);
    let dphi = Complex64::from_polar(1.0, -omega / sample_rate);
    let mut phasor = Complex64::from_polar(1.0, -omega * t0);
    let mut acc = Complex64::new(0.0, 0.0);
    let mut wsum = 0.0;
    for (k, (x, wk)) in trace.iter().zip(&w).enumerate() {
        if k % 1024 == 0 {
            phasor = Complex64::from_polar(1.0, -omega * (t0 + k as f64 / sample_rate));
        }
        acc += phasor * (x * wk);
        wsum += wk;
        phasor *= dphi;
    }
    acc * (2.0 / wsum)
}

/// Frequency (Hz) of the largest Hann-windowed FFT bin within `[lo, hi]` Hz.
pub fn fft_peak(trace: &[f64], sample_rate: f64, lo: f64, hi: f64) -> Result<f64> {
    let n = trace.len();
    if n < 4 {
        return Err(Error::Length(format!("trace of {n} samples is too short for a spectrum")));
    }
    let w = Window::Hann.coefficients(n);
    let mut buf: Vec<Complex64> = trace.iter().zip(&w).map(|(x, w)| Complex64::new(x * w, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let df = sample_rate / n as f64;
    let k_lo = (lo / df).floor().max(0.0) as usize;
    let k_hi = ((hi / df).ceil() as usize).min(n / 2);
    if k_lo > k_hi {
        return Err(Error::domain(format!("empty search band [{lo}, {hi}] Hz")));
    }
    let k = (k_lo..=k_hi)
        .max_by(|&a, &b| buf[a].norm_sqr().total_cmp(&buf[b].norm_sqr()))
        .expect("non-empty band");
    Ok(k as f64 * df)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineEstimate {
    /// Hz.
    pub frequency: f64,
    pub amplitude: f64,
    /// Phase of the cosine at t = 0 (rad).
    pub phase: f64,
}

/// Locates the strongest line in `[lo, hi]` Hz (widened to at least ±2 bins
/// around its center) and refines its frequency by golden-section search on
/// the lock-in magnitude.
pub fn refine_line(trace: &[f64], sample_rate: f64, t0: f64, lo: f64, hi: f64) -> Result<LineEstimate> {
    let df = sample_rate / trace.len().max(1) as f64;
    let center = 0.5 * (lo + hi);
    let half = (0.5 * (hi - lo)).max(2.0 * df);
    let coarse = fft_peak(trace, sample_rate, center - half, center + half)?;
    let mag = |f: f64| demodulate(trace, sample_rate, t0, 2.0 * PI * f).norm();
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (coarse - df, coarse + df);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (mag(c), mag(d));
    while b - a > 1e-7 * df {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = mag(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = mag(d);
        }
    }
    let frequency = 0.5 * (a + b);
    let z = demodulate(trace, sample_rate, t0, 2.0 * PI * frequency);
    Ok(LineEstimate {
        frequency,
        amplitude: z.norm(),
        phase: z.arg(),
    })
}
