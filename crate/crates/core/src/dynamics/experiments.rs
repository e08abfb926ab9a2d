//! Driven and thermal experiments built on [`Simulator`].

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{Simulator, TraceSet};
use crate::error::{Error, Result};
use crate::reduced::{stability_check, ReducedModel, StabilityClass};
use crate::spectral::{demodulate, refine_line};
use crate::system::{SystemConfig, TablePair};

/// Relative change of an amplitude between the two halves of the window above
/// which the run is declared unsettled.
pub const MAX_DRIFT: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOptions {
    /// Transient time discarded before measuring (s); derived from the model when absent.
    pub settle: Option<f64>,
    /// Length of the measurement window (s); a third of the settle time when absent,
    /// so the window is the trailing 25% of the run.
    pub window: Option<f64>,
    /// Displacement beyond which a run counts as unstable, as a fraction of the smaller gap.
    pub instability_fraction: f64,
    /// Run even when the reduced model predicts growth.
    pub allow_unstable: bool,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self {
            settle: None,
            window: None,
            instability_fraction: 0.1,
            allow_unstable: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineAmplitude {
    /// Line frequency found in the trace (Hz).
    pub frequency_hz: f64,
    /// Displacement amplitude (m).
    pub amplitude: f64,
    pub phase: f64,
    /// Relative amplitude change between the two halves of the window.
    pub drift: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    /// Measurement window only.
    pub traces: TraceSet,
    pub lines: [LineAmplitude; 3],
    /// A₃/A₁.
    pub ratio: f64,
    pub model: ReducedModel,
    /// Reduced-model stability margin (rad/s).
    pub margin: f64,
    pub settle: f64,
}

impl ExperimentOutcome {
    pub fn amplitudes(&self) -> [f64; 3] {
        [self.lines[0].amplitude, self.lines[1].amplitude, self.lines[2].amplitude]
    }
}

/// Transient time: the longest of 20/min|γᵢ|, 10/max|g| and 12/margin.
pub fn settle_time(config: &SystemConfig, model: Option<&ReducedModel>) -> f64 {
    let mut gammas: Vec<f64> = config.cantilevers.iter().map(|c| c.gamma.abs()).collect();
    gammas[1] = (config.cantilevers[1].gamma - config.gain).abs();
    let g_min = gammas.into_iter().filter(|g| *g > 0.0).fold(f64::INFINITY, f64::min);
    let mut t = if g_min.is_finite() { 20.0 / g_min } else { 0.0 };
    if let Some(m) = model {
        let g = m.g12.abs().max(m.g23.abs());
        if g > 0.0 {
            t = t.max(10.0 / g);
        }
        let margin = stability_check(m).margin;
        if margin > 0.0 {
            t = t.max(12.0 / margin);
        }
    }
    t
}

/// Expected line frequencies (rad/s) for a drive at `omega_d`: cantilever 2
/// responds at ω_d + ω_mod1 and cantilever 3 at ω_d + ω_mod1 − ω_mod2.
pub fn line_frequencies(config: &SystemConfig, omega_d: f64) -> [f64; 3] {
    let m = &config.modulation;
    [omega_d, omega_d + m.omega_mod1, omega_d + m.omega_mod1 - m.omega_mod2]
}

/// Amplitude of the line nearest `omega` (rad/s) in `trace`, searching ±3γ
/// (`gamma` in rad/s) and checking the drift across the window halves.
pub fn extract_line(trace: &[f64], sample_rate: f64, t0: f64, omega: f64, gamma: f64) -> Result<LineAmplitude> {
    let f = omega / (2.0 * PI);
    let half = 3.0 * gamma.abs() / (2.0 * PI);
    let line = refine_line(trace, sample_rate, t0, f - half, f + half)?;
    let n = trace.len() / 2;
    let w = 2.0 * PI * line.frequency;
    let a = demodulate(&trace[..n], sample_rate, t0, w).norm();
    let b = demodulate(&trace[n..], sample_rate, t0 + n as f64 / sample_rate, w).norm();
    let drift = if line.amplitude > 0.0 {
        (a - b).abs() / line.amplitude
    } else {
        0.0
    };
    Ok(LineAmplitude {
        frequency_hz: line.frequency,
        amplitude: line.amplitude,
        phase: line.phase,
        drift,
    })
}

fn run_driven(config: &SystemConfig, tables: &TablePair, options: &ExperimentOptions, label: &str) -> Result<ExperimentOutcome> {
    let drive = config
        .drive
        .ok_or_else(|| Error::precondition("driven experiments need a drive on one cantilever"))?;
    let model = config.reduced_model(tables)?;
    let stability = stability_check(&model);
    if stability.class == StabilityClass::Unstable && !options.allow_unstable {
        return Err(Error::Unstable {
            margin: stability.margin,
        });
    }
    let settle = options.settle.unwrap_or_else(|| settle_time(config, Some(&model)));
    let window = options.window.unwrap_or(settle / 3.0);
    let bound = options.instability_fraction * config.geometry.d1.min(config.geometry.d2);
    let sim = Simulator::new(config, tables)?.with_instability_bound(bound, stability.margin);
    let mut state = sim.initial_state(config.seed);
    sim.advance(&mut state, settle)?;
    let traces = sim.record(&mut state, window, config.integrator.stride, label)?;

    let omegas = line_frequencies(config, drive.frequency);
    let gammas = config.cantilevers_with_gain()?.map(|c| c.gamma.abs().max(1e-3 * c.omega));
    let mut lines = [LineAmplitude {
        frequency_hz: 0.0,
        amplitude: 0.0,
        phase: 0.0,
        drift: 0.0,
    }; 3];
    for i in 0..3 {
        lines[i] = extract_line(&traces.traces[i], traces.sample_rate, traces.start_time, omegas[i], gammas[i])?;
    }
    let largest = lines.iter().map(|l| l.amplitude).fold(0.0, f64::max);
    for (i, l) in lines.iter().enumerate() {
        if l.amplitude > 1e-4 * largest && l.drift > MAX_DRIFT {
            return Err(Error::SteadyState {
                cantilever: i + 1,
                drift: 100.0 * l.drift,
            });
        }
    }
    let ratio = lines[2].amplitude / lines[0].amplitude;
    Ok(ExperimentOutcome {
        traces,
        lines,
        ratio,
        model,
        margin: stability.margin,
        settle,
    })
}

/// Drives one cantilever with modulation as configured and measures the
/// steady-state line amplitudes A₁, A₂, A₃.
pub fn run_switch_experiment(config: &SystemConfig, tables: &TablePair, options: &ExperimentOptions) -> Result<ExperimentOutcome> {
    run_driven(config, tables, options, "driven")
}

/// As [`run_switch_experiment`] with the feedback gain applied; the reduced
/// model must be stable.
pub fn run_gain_experiment(config: &SystemConfig, tables: &TablePair, options: &ExperimentOptions) -> Result<ExperimentOutcome> {
    let margin = stability_check(&config.reduced_model(tables)?).margin;
    if !(margin > 0.0) {
        return Err(Error::Unstable { margin });
    }
    run_driven(config, tables, options, "driven")
}

/// Thermally driven run: discards `settle` seconds, then records `duration` seconds.
/// Without tables the cantilevers are uncoupled.
pub fn run_thermal_psd(config: &SystemConfig, tables: Option<&TablePair>, duration: f64, settle: f64) -> Result<TraceSet> {
    if !config.noise.enabled {
        return Err(Error::precondition("thermal runs need noise enabled"));
    }
    let sim = match tables {
        Some(t) => Simulator::new(config, t)?,
        None => Simulator::without_casimir(config)?,
    };
    let mut state = sim.initial_state(config.seed);
    sim.advance(&mut state, settle)?;
    sim.record(&mut state, duration, config.integrator.stride, "thermal")
}

/// Late-time growth rate (1/s) of a small perturbation's energy, ln E(t) slope.
///
/// Two noiseless runs from equilibrium differ only by a displacement
/// `kick` (m) of cantilever 1; their difference removes the forced response
/// to the modulation and leaves the free modes. The usable record ends once
/// the difference energy falls 40 e-folds below its start (round-off takes
/// over after that), and the slope is fitted over its last two thirds. A run that exceeds the linear-regime bound
/// reports `f64::INFINITY`.
pub fn growth_rate(config: &SystemConfig, tables: &TablePair, duration: f64, kick: f64) -> Result<f64> {
    let mut cfg = config.clone();
    cfg.noise.enabled = false;
    cfg.drive = None;
    let bound = 0.1 * cfg.geometry.d1.min(cfg.geometry.d2);
    let sim = Simulator::new(&cfg, tables)?.with_instability_bound(bound, 0.0);
    let stride = cfg.integrator.stride;
    let run = |x0: [f64; 3]| {
        let mut s = super::SimulationState::new(x0, [0.0; 3], cfg.seed);
        sim.record(&mut s, duration, stride, "growth")
    };
    let (kicked, rest) = match (run([kick, 0.0, 0.0]), run([0.0; 3])) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(Error::Unstable { .. }), _) | (_, Err(Error::Unstable { .. })) => return Ok(f64::INFINITY),
        (Err(e), _) | (_, Err(e)) => return Err(e),
    };
    let k: Vec<f64> = cfg.cantilevers.iter().map(|c| c.k_spring).collect();
    let n = kicked.len();
    // block-averaged potential energy removes the oscillation at the mode frequencies
    let min_omega = cfg.cantilevers.iter().map(|c| c.omega).fold(f64::INFINITY, f64::min);
    let block = ((20.0 * PI / min_omega) * kicked.sample_rate).ceil().max(1.0) as usize;
    let energy = |j: usize| -> f64 {
        (0..3)
            .map(|i| {
                let d = kicked.traces[i][j] - rest.traces[i][j];
                0.5 * k[i] * d * d
            })
            .sum()
    };
    let e0 = 0.5 * k[0] * kick * kick;
    let mut ts = Vec::new();
    let mut ls = Vec::new();
    let mut j = 0;
    while j + block <= n {
        let e: f64 = (j..j + block).map(energy).sum::<f64>() / block as f64;
        if !(e > 0.0) || e.ln() < e0.ln() - 40.0 {
            break;
        }
        ts.push(kicked.time(j));
        ls.push(e.ln());
        j += block;
    }
    let skip = ts.len() / 3;
    let (ts, ls) = (&ts[skip..], &ls[skip..]);
    if ts.len() < 4 {
        return Err(Error::precondition("perturbation decayed too fast to fit; lengthen the sampling"));
    }
    let cnt = ts.len() as f64;
    let (mt, ml) = (ts.iter().sum::<f64>() / cnt, ls.iter().sum::<f64>() / cnt);
    let num: f64 = ts.iter().zip(ls).map(|(t, l)| (t - mt) * (l - ml)).sum();
    let den: f64 = ts.iter().map(|t| (t - mt) * (t - mt)).sum();
    Ok(num / den)
}
