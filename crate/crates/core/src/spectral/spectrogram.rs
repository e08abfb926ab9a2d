//! Thermal PSD maps over a swept control parameter.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::welch_psd;
use crate::dynamics::{run_thermal_psd, settle_time};
use crate::error::{Error, Result};
use crate::system::{SystemConfig, TablePair};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    OmegaMod1,
    OmegaMod2,
    #[serde(rename = "G", alias = "gain")]
    Gain,
    DeltaD1,
    DeltaD2,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::OmegaMod1 => "omega_mod1",
            SweepParameter::OmegaMod2 => "omega_mod2",
            SweepParameter::Gain => "G",
            SweepParameter::DeltaD1 => "delta_d1",
            SweepParameter::DeltaD2 => "delta_d2",
        }
    }

    /// SI unit of the sweep values.
    pub fn unit(self) -> &'static str {
        match self {
            SweepParameter::DeltaD1 | SweepParameter::DeltaD2 => "m",
            _ => "rad/s",
        }
    }

    /// Copy of `config` with this parameter set to `value`.
    pub fn apply(self, config: &SystemConfig, value: f64) -> SystemConfig {
        let mut c = config.clone();
        match self {
            SweepParameter::OmegaMod1 => c.modulation.omega_mod1 = value,
            SweepParameter::OmegaMod2 => c.modulation.omega_mod2 = value,
            SweepParameter::Gain => c.gain = value,
            SweepParameter::DeltaD1 => c.modulation.delta_d1 = value,
            SweepParameter::DeltaD2 => c.modulation.delta_d2 = value,
        }
        c
    }
}

impl fmt::Display for SweepParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "omega_mod1" => SweepParameter::OmegaMod1,
            "omega_mod2" => SweepParameter::OmegaMod2,
            "G" | "gain" => SweepParameter::Gain,
            "delta_d1" => SweepParameter::DeltaD1,
            "delta_d2" => SweepParameter::DeltaD2,
            other => {
                return Err(Error::config(format!(
                    "unknown sweep parameter {other:?}; expected omega_mod1, omega_mod2, G, delta_d1 or delta_d2"
                )))
            }
        })
    }
}

/// Seed of sweep row `index`, derived from the master seed with SplitMix64.
pub fn sweep_seed(master: u64, index: usize) -> u64 {
    let mut z = master.wrapping_add((index as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrogramOptions {
    /// Recorded time per row (s).
    pub duration: f64,
    /// Discarded transient per row (s); derived from the model when absent.
    pub settle: Option<f64>,
    /// Welch segment length (s).
    pub segment_seconds: f64,
    pub overlap: f64,
    /// Frequency band kept in the map (Hz); the full one-sided grid when absent.
    pub band: Option<(f64, f64)>,
}

impl Default for SpectrogramOptions {
    fn default() -> Self {
        Self {
            duration: 64.0,
            settle: None,
            segment_seconds: 8.0,
            overlap: 0.5,
            band: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrogramRow {
    pub value: f64,
    pub seed: u64,
    /// PSD of each cantilever (m²/Hz) on the map's frequency grid.
    pub psd: [Vec<f64>; 3],
    /// Displacement variance of each trace (m²).
    pub variance: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrogram {
    pub parameter: SweepParameter,
    /// Hz.
    pub frequencies: Vec<f64>,
    pub rows: Vec<SpectrogramRow>,
    pub sample_rate: f64,
    pub segment_length: usize,
    pub overlap: f64,
    pub master_seed: u64,
}

#[derive(Serialize)]
struct Metadata<'a> {
    parameter: &'a str,
    unit: &'a str,
    sweep_values: Vec<f64>,
    seeds: Vec<u64>,
    master_seed: u64,
    frequency_start_hz: f64,
    frequency_step_hz: f64,
    frequency_bins: usize,
    sample_rate_hz: f64,
    segment_length: usize,
    overlap: f64,
    window: &'a str,
    psd_unit: &'a str,
}

impl Spectrogram {
    pub fn sweep_values(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.value).collect()
    }

    pub fn resolution(&self) -> f64 {
        self.sample_rate / self.segment_length as f64
    }

    /// CSV matrix for cantilever `index` (1-based): one row per sweep value,
    /// one column per frequency bin.
    pub fn write_csv<W: Write>(&self, index: usize, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec![self.parameter.name().to_string()];
        header.extend(self.frequencies.iter().map(|f| format!("{f}")));
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![format!("{}", row.value)];
            rec.extend(row.psd[index - 1].iter().map(|v| format!("{v:e}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Axis metadata for the CSV matrices.
    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        let meta = Metadata {
            parameter: self.parameter.name(),
            unit: self.parameter.unit(),
            sweep_values: self.sweep_values(),
            seeds: self.rows.iter().map(|r| r.seed).collect(),
            master_seed: self.master_seed,
            frequency_start_hz: self.frequencies.first().copied().unwrap_or(0.0),
            frequency_step_hz: self.resolution(),
            frequency_bins: self.frequencies.len(),
            sample_rate_hz: self.sample_rate,
            segment_length: self.segment_length,
            overlap: self.overlap,
            window: "hann",
            psd_unit: "m^2/Hz",
        };
        serde_json::to_writer_pretty(writer, &meta)?;
        Ok(())
    }
}

fn row_config(config: &SystemConfig, parameter: SweepParameter, value: f64, index: usize) -> SystemConfig {
    let mut c = parameter.apply(config, value);
    c.seed = sweep_seed(config.seed, index);
    c.noise.enabled = true;
    c
}

/// One thermal run per sweep value, each with its own derived seed, turned
/// into Welch PSDs of all three cantilevers. Rows run in parallel.
pub fn sweep_spectrogram(
    config: &SystemConfig,
    tables: &TablePair,
    parameter: SweepParameter,
    values: &[f64],
    options: &SpectrogramOptions,
) -> Result<Spectrogram> {
    let sample_rate = 1.0 / (config.time_step() * config.integrator.stride as f64);
    let segment_length = (options.segment_seconds * sample_rate).round() as usize;
    let n_full = segment_length / 2 + 1;
    let df = sample_rate / segment_length as f64;
    let (lo, hi) = match options.band {
        Some((a, b)) => (((a / df).floor().max(0.0) as usize).min(n_full), ((b / df).ceil() as usize + 1).min(n_full)),
        None => (0, n_full),
    };
    if lo >= hi {
        return Err(Error::domain("spectrogram band holds no frequency bins"));
    }
    let rows: Vec<SpectrogramRow> = values
        .par_iter()
        .enumerate()
        .map(|(i, &value)| -> Result<SpectrogramRow> {
            let cfg = row_config(config, parameter, value, i);
            let model = cfg.reduced_model(tables).ok();
            let settle = options.settle.unwrap_or_else(|| settle_time(&cfg, model.as_ref()));
            let traces = run_thermal_psd(&cfg, Some(tables), options.duration, settle)?;
            let mut psd: [Vec<f64>; 3] = Default::default();
            let mut variance = [0.0; 3];
            for k in 0..3 {
                let est = welch_psd(&traces.traces[k], traces.sample_rate, segment_length, options.overlap)?;
                psd[k] = est.values[lo..hi].to_vec();
                let x = &traces.traces[k];
                let mean = x.iter().sum::<f64>() / x.len() as f64;
                variance[k] = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / x.len() as f64;
            }
            Ok(SpectrogramRow {
                value,
                seed: cfg.seed,
                psd,
                variance,
            })
        })
        .enumerate()
        .map(|(i, r)| r.map_err(|e| e.at_sweep_value(values[i])))
        .collect::<Result<_>>()?;
    Ok(Spectrogram {
        parameter,
        frequencies: (lo..hi).map(|k| k as f64 * df).collect(),
        rows,
        sample_rate,
        segment_length,
        overlap: options.overlap,
        master_seed: config.seed,
    })
}
