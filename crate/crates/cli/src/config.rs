//! Experiment description files.
//!
//! A config is a TOML document whose physical quantities carry their unit in
//! the key name (`_hz`, `_nm`, `_um`, `_kg`, `_ev`, `_k`, `_n`, `_s`). Every
//! frequency given in Hz is an ordinary frequency f; the library works with
//! ω = 2πf. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use tribody::casimir::{Geometry, TableGrid, DEFAULT_SPHERE_RADIUS};
use tribody::physics::constants::{ev_to_rad_per_s, hz};
use tribody::physics::MaterialModel;
use tribody::reduced::{resonant_modulation, CantileverParams, FrequencyShift, ModulationSettings};
use tribody::spectral::SweepParameter;
use tribody::system::{
    DriveSettings, IntegratorSettings, NoiseSettings, SystemConfig, TablePair, NOMINAL_DAMPING_HZ, NOMINAL_FREQUENCIES_HZ,
};

use crate::error::{CliError, CliResult};

/// Modal mass used when a config does not give one (kg). The cantilever
/// masses are not published; this value reproduces the reported on-resonance
/// transfer ratio of 0.44 at d = 100/105 nm with 6.0/8.5 nm modulation.
pub const DEFAULT_MASS_KG: f64 = 1.4498e-10;

const MAX_SWEEP_POINTS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub seed: u64,
    /// Figure identifier passed through to the output manifest.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub figure: Option<String>,
    #[serde(default)]
    pub cantilevers: CantileverSection,
    pub geometry: GeometrySection,
    #[serde(default)]
    pub material: MaterialSection,
    #[serde(default)]
    pub table: TableSection,
    #[serde(default)]
    pub modulation: ModulationSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drive: Option<DriveSection>,
    #[serde(default)]
    pub feedback: FeedbackSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub integrator: IntegratorSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub force_curve: Option<ForceCurveSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigen_sweep: Option<EigenSweepSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrogram: Option<SpectrogramSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<CalibrationSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CantileverSection {
    #[serde(default = "default_masses")]
    pub mass_kg: [f64; 3],
    #[serde(default = "default_frequencies")]
    pub frequency_hz: [f64; 3],
    #[serde(default = "default_damping")]
    pub damping_hz: [f64; 3],
}

fn default_masses() -> [f64; 3] {
    [DEFAULT_MASS_KG; 3]
}
fn default_frequencies() -> [f64; 3] {
    NOMINAL_FREQUENCIES_HZ
}
fn default_damping() -> [f64; 3] {
    NOMINAL_DAMPING_HZ
}

impl Default for CantileverSection {
    fn default() -> Self {
        Self {
            mass_kg: default_masses(),
            frequency_hz: default_frequencies(),
            damping_hz: default_damping(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    pub d1_nm: f64,
    pub d2_nm: f64,
    #[serde(default = "default_radius_um")]
    pub r1_um: f64,
    #[serde(default = "default_radius_um")]
    pub r2_um: f64,
}

fn default_radius_um() -> f64 {
    DEFAULT_SPHERE_RADIUS * 1e6
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaterialKind {
    #[default]
    Drude,
    Plasma,
    Ideal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSection {
    #[serde(default)]
    pub model: MaterialKind,
    #[serde(default = "default_plasma_ev")]
    pub plasma_frequency_ev: f64,
    #[serde(default = "default_damping_ev")]
    pub damping_ev: f64,
    /// Temperature of the force tables.
    #[serde(default = "default_temperature")]
    pub temperature_k: f64,
}

fn default_plasma_ev() -> f64 {
    9.0
}
fn default_damping_ev() -> f64 {
    0.035
}
fn default_temperature() -> f64 {
    300.0
}

impl Default for MaterialSection {
    fn default() -> Self {
        Self {
            model: MaterialKind::Drude,
            plasma_frequency_ev: default_plasma_ev(),
            damping_ev: default_damping_ev(),
            temperature_k: default_temperature(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableSection {
    #[serde(default = "default_table_min")]
    pub min_nm: f64,
    #[serde(default = "default_table_max")]
    pub max_nm: f64,
    #[serde(default = "default_table_points")]
    pub points: usize,
}

fn default_table_min() -> f64 {
    TableGrid::default().min * 1e9
}
fn default_table_max() -> f64 {
    TableGrid::default().max * 1e9
}
fn default_table_points() -> usize {
    TableGrid::default().points
}

impl Default for TableSection {
    fn default() -> Self {
        Self {
            min_nm: default_table_min(),
            max_nm: default_table_max(),
            points: default_table_points(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Keyword {
    Resonant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResonantOffset {
    pub resonant_offset_hz: f64,
}

/// A frequency in Hz, `"resonant"` to derive it from the mode frequencies, or
/// `{ resonant_offset_hz = Δ }` for the resonant value shifted by Δ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Frequency {
    Hz(f64),
    Keyword(Keyword),
    Offset(ResonantOffset),
}

impl Default for Frequency {
    fn default() -> Self {
        Frequency::Hz(0.0)
    }
}

impl Frequency {
    fn is_resonant(self) -> bool {
        !matches!(self, Frequency::Hz(_))
    }

    fn placeholder_rad_s(self) -> f64 {
        match self {
            Frequency::Hz(f) => hz(f),
            _ => 0.0,
        }
    }

    /// Value given the resonant frequency (rad/s); fixed values are returned as is.
    fn resolved(self, resonant: f64) -> f64 {
        match self {
            Frequency::Hz(f) => hz(f),
            Frequency::Keyword(Keyword::Resonant) => resonant,
            Frequency::Offset(o) => resonant + hz(o.resonant_offset_hz),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulationSection {
    #[serde(default)]
    pub omega_mod1_hz: Frequency,
    #[serde(default)]
    pub omega_mod2_hz: Frequency,
    #[serde(default)]
    pub delta_d1_nm: f64,
    #[serde(default)]
    pub delta_d2_nm: f64,
    #[serde(default)]
    pub frequency_shift: FrequencyShift,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveSection {
    #[serde(default = "default_target")]
    pub target: usize,
    pub amplitude_n: f64,
    #[serde(default = "resonant")]
    pub frequency_hz: Frequency,
    #[serde(default)]
    pub phase_rad: f64,
}

fn default_target() -> usize {
    1
}
fn resonant() -> Frequency {
    Frequency::Keyword(Keyword::Resonant)
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedbackSection {
    #[serde(default)]
    pub gain_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default = "default_temperature")]
    pub temperature_k: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            enabled: false,
            temperature_k: default_temperature(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    #[serde(default = "default_steps")]
    pub steps_per_period: f64,
    #[serde(default = "default_stride")]
    pub sample_stride: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub settle_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_s: Option<f64>,
}

fn default_steps() -> f64 {
    IntegratorSettings::default().steps_per_period
}
fn default_stride() -> usize {
    IntegratorSettings::default().stride
}

impl Default for IntegratorSection {
    fn default() -> Self {
        Self {
            steps_per_period: default_steps(),
            sample_stride: default_stride(),
            settle_s: None,
            window_s: None,
        }
    }
}

/// Inclusive arithmetic sequence; `step` may be negative for a descending sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Range {
    pub fn values(&self, key: &str) -> CliResult<Vec<f64>> {
        let Range { start, stop, step } = *self;
        if !(start.is_finite() && stop.is_finite() && step.is_finite()) || step == 0.0 {
            return Err(CliError::config(key, "start, stop and step must be finite and step nonzero"));
        }
        let span = (stop - start) / step;
        if span < -1e-9 {
            return Err(CliError::config(key, "step points away from stop"));
        }
        let n = (span + 1e-9).floor() as usize + 1;
        if n > MAX_SWEEP_POINTS {
            return Err(CliError::config(key, format!("{n} points exceeds the limit of {MAX_SWEEP_POINTS}")));
        }
        Ok((0..n).map(|i| start + i as f64 * step).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForceCurveMode {
    /// Cantilever 2 moves with d₁ + d₂ fixed; the sweep gives d₁.
    MoveCenter,
    /// Cantilever 1 moves with d₂ fixed; the sweep gives d₁.
    #[serde(rename = "move_1")]
    Move1,
    /// Cantilever 3 moves with d₁ fixed; the sweep gives d₂.
    #[serde(rename = "move_3")]
    Move3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForceCurveSection {
    pub mode: ForceCurveMode,
    /// d₁ + d₂ for `move_center`; taken from the geometry when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_nm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values_nm: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range_nm: Option<Range>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigenSweepSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta3_values_hz: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta3_range_hz: Option<Range>,
    #[serde(default)]
    pub delta2_hz: f64,
    /// Coupling strengths; computed from the modulation and force tables when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g12_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g23_hz: Option<f64>,
    /// Damping rates used in H; the cantilever damping (with gain) when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub damping_hz: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// omega_mod1, omega_mod2, G, delta_d1, delta_d2 or drive_amplitude.
    pub parameter: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values_hz: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range_hz: Option<Range>,
    /// Offsets from the configured (or resonant) value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offsets_hz: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset_range_hz: Option<Range>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values_nm: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range_nm: Option<Range>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values_n: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range_n: Option<Range>,
    /// With `delta_d1` sweeps, sets δ_d2 = ratio·δ_d1 on every row.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_d2_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrogramSection {
    #[serde(default = "default_duration")]
    pub duration_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub settle_s: Option<f64>,
    #[serde(default = "default_segment")]
    pub segment_s: f64,
    #[serde(default = "default_overlap")]
    pub overlap: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band_hz: Option<[f64; 2]>,
}

fn default_duration() -> f64 {
    64.0
}
fn default_segment() -> f64 {
    8.0
}
fn default_overlap() -> f64 {
    0.5
}

impl Default for SpectrogramSection {
    fn default() -> Self {
        Self {
            duration_s: default_duration(),
            settle_s: None,
            segment_s: default_segment(),
            overlap: default_overlap(),
            band_hz: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSection {
    /// CSV with columns V_ext_V, delta_omega_rad_s; relative to the config file.
    pub records: PathBuf,
    pub omega0_hz: f64,
    pub k_n_per_m: f64,
    /// Sphere radius; r1 from the geometry when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius_um: Option<f64>,
}

/// What a transduction or spectrogram sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepTarget {
    Parameter(SweepParameter),
    DriveAmplitude,
}

impl SweepTarget {
    pub fn name(self) -> &'static str {
        match self {
            SweepTarget::Parameter(p) => p.name(),
            SweepTarget::DriveAmplitude => "drive_amplitude",
        }
    }

    /// SI unit of the sweep values as written to the outputs.
    pub fn unit(self) -> &'static str {
        match self {
            SweepTarget::Parameter(p) => p.unit(),
            SweepTarget::DriveAmplitude => "N",
        }
    }

    fn is_frequency(self) -> bool {
        matches!(
            self,
            SweepTarget::Parameter(SweepParameter::OmegaMod1 | SweepParameter::OmegaMod2 | SweepParameter::Gain)
        )
    }

    fn is_length(self) -> bool {
        matches!(self, SweepTarget::Parameter(SweepParameter::DeltaD1 | SweepParameter::DeltaD2))
    }

    /// Current value of the target in `cfg` (SI).
    pub fn current(self, cfg: &SystemConfig) -> f64 {
        match self {
            SweepTarget::Parameter(SweepParameter::OmegaMod1) => cfg.modulation.omega_mod1,
            SweepTarget::Parameter(SweepParameter::OmegaMod2) => cfg.modulation.omega_mod2,
            SweepTarget::Parameter(SweepParameter::Gain) => cfg.gain,
            SweepTarget::Parameter(SweepParameter::DeltaD1) => cfg.modulation.delta_d1,
            SweepTarget::Parameter(SweepParameter::DeltaD2) => cfg.modulation.delta_d2,
            SweepTarget::DriveAmplitude => cfg.drive.map_or(0.0, |d| d.amplitude),
        }
    }
}

/// Sweep values in SI units, possibly relative to the resolved base value.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    pub target: SweepTarget,
    pub values: Vec<f64>,
    pub relative: bool,
    pub delta_d2_ratio: Option<f64>,
}

impl SweepPlan {
    /// Absolute sweep values given the resolved base configuration.
    pub fn absolute(&self, base: &SystemConfig) -> Vec<f64> {
        if self.relative {
            let v0 = self.target.current(base);
            self.values.iter().map(|o| v0 + o).collect()
        } else {
            self.values.clone()
        }
    }
}

/// A parsed config together with its source text and location.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub file: ConfigFile,
    pub text: String,
    pub dir: PathBuf,
    /// Seed after any command-line override.
    pub seed: u64,
}

impl LoadedConfig {
    pub fn load(path: impl AsRef<Path>) -> CliResult<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_str(&text, dir)
    }

    pub fn from_str(text: &str, dir: impl Into<PathBuf>) -> CliResult<Self> {
        let file = ConfigFile::parse(text)?;
        file.validate()?;
        Ok(Self {
            seed: file.seed,
            file,
            text: text.to_string(),
            dir: dir.into(),
        })
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        if let Some(s) = seed {
            self.seed = s;
        }
        self
    }

    /// System configuration with "resonant" placeholders still unresolved.
    pub fn base_config(&self) -> CliResult<SystemConfig> {
        self.file.system_config(self.seed)
    }
}

impl ConfigFile {
    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| {
            let key = e.span().map(|s| key_path_at(text, s.start)).unwrap_or_else(|| "config".into());
            CliError::config(key, e.to_string().trim_end().to_string())
        })
    }

    /// Range and consistency checks, each reported with its key path.
    pub fn validate(&self) -> CliResult<()> {
        let c = &self.cantilevers;
        for i in 0..3 {
            positive(&format!("cantilevers.mass_kg[{i}]"), c.mass_kg[i])?;
            positive(&format!("cantilevers.frequency_hz[{i}]"), c.frequency_hz[i])?;
            non_negative(&format!("cantilevers.damping_hz[{i}]"), c.damping_hz[i])?;
        }
        let g = &self.geometry;
        positive("geometry.d1_nm", g.d1_nm)?;
        positive("geometry.d2_nm", g.d2_nm)?;
        positive("geometry.r1_um", g.r1_um)?;
        positive("geometry.r2_um", g.r2_um)?;
        let m = &self.material;
        positive("material.plasma_frequency_ev", m.plasma_frequency_ev)?;
        positive("material.damping_ev", m.damping_ev)?;
        non_negative("material.temperature_k", m.temperature_k)?;
        let t = &self.table;
        positive("table.min_nm", t.min_nm)?;
        if !(t.max_nm > t.min_nm) {
            return Err(CliError::config("table.max_nm", "must exceed table.min_nm"));
        }
        if t.points < 4 {
            return Err(CliError::config("table.points", "need at least 4 points"));
        }
        for (key, d) in [("geometry.d1_nm", g.d1_nm), ("geometry.d2_nm", g.d2_nm)] {
            if d < t.min_nm || d > t.max_nm {
                return Err(CliError::config(
                    key,
                    format!("{d} nm lies outside the force table [{}, {}] nm", t.min_nm, t.max_nm),
                ));
            }
        }
        let md = &self.modulation;
        non_negative("modulation.delta_d1_nm", md.delta_d1_nm)?;
        non_negative("modulation.delta_d2_nm", md.delta_d2_nm)?;
        frequency("modulation.omega_mod1_hz", md.omega_mod1_hz)?;
        frequency("modulation.omega_mod2_hz", md.omega_mod2_hz)?;
        let swing = md.delta_d1_nm + md.delta_d2_nm;
        for (key, d) in [("geometry.d1_nm", g.d1_nm), ("geometry.d2_nm", g.d2_nm)] {
            if d - swing < t.min_nm || d + swing > t.max_nm {
                return Err(CliError::config(
                    "modulation.delta_d1_nm",
                    format!("modulation of {swing} nm carries {key} = {d} nm outside the force table"),
                ));
            }
        }
        if let Some(dr) = &self.drive {
            if !(1..=3).contains(&dr.target) {
                return Err(CliError::config("drive.target", "must be 1, 2 or 3"));
            }
            non_negative("drive.amplitude_n", dr.amplitude_n)?;
            frequency("drive.frequency_hz", dr.frequency_hz)?;
            finite("drive.phase_rad", dr.phase_rad)?;
        }
        non_negative("feedback.gain_hz", self.feedback.gain_hz)?;
        non_negative("noise.temperature_k", self.noise.temperature_k)?;
        let it = &self.integrator;
        if !(it.steps_per_period >= 200.0) || !it.steps_per_period.is_finite() {
            return Err(CliError::config("integrator.steps_per_period", "must be at least 200"));
        }
        if it.sample_stride == 0 {
            return Err(CliError::config("integrator.sample_stride", "must be at least 1"));
        }
        if let Some(s) = it.settle_s {
            non_negative("integrator.settle_s", s)?;
        }
        if let Some(w) = it.window_s {
            positive("integrator.window_s", w)?;
        }
        if let Some(fc) = &self.force_curve {
            fc.values(self)?;
            if let Some(total) = fc.total_nm {
                positive("force_curve.total_nm", total)?;
            }
        }
        if let Some(es) = &self.eigen_sweep {
            es.delta3_values()?;
            finite("eigen_sweep.delta2_hz", es.delta2_hz)?;
            if es.g12_hz.is_some() != es.g23_hz.is_some() {
                return Err(CliError::config("eigen_sweep.g12_hz", "give both g12_hz and g23_hz or neither"));
            }
            for (key, v) in [("eigen_sweep.g12_hz", es.g12_hz), ("eigen_sweep.g23_hz", es.g23_hz)] {
                if let Some(v) = v {
                    finite(key, v)?;
                }
            }
            if let Some(d) = es.damping_hz {
                for (i, v) in d.iter().enumerate() {
                    finite(&format!("eigen_sweep.damping_hz[{i}]"), *v)?;
                }
            }
        }
        if let Some(sw) = &self.sweep {
            sw.plan()?;
        }
        if let Some(sp) = &self.spectrogram {
            positive("spectrogram.duration_s", sp.duration_s)?;
            positive("spectrogram.segment_s", sp.segment_s)?;
            if sp.segment_s * 2.0 > sp.duration_s {
                return Err(CliError::config("spectrogram.segment_s", "duration must hold at least two segments"));
            }
            if !(0.0..1.0).contains(&sp.overlap) {
                return Err(CliError::config("spectrogram.overlap", "must lie in [0, 1)"));
            }
            if let Some(s) = sp.settle_s {
                non_negative("spectrogram.settle_s", s)?;
            }
            if let Some([lo, hi]) = sp.band_hz {
                if !(lo >= 0.0 && hi > lo) {
                    return Err(CliError::config("spectrogram.band_hz", "need 0 ≤ low < high"));
                }
            }
        }
        if let Some(cal) = &self.calibration {
            positive("calibration.omega0_hz", cal.omega0_hz)?;
            positive("calibration.k_n_per_m", cal.k_n_per_m)?;
            if let Some(r) = cal.radius_um {
                positive("calibration.radius_um", r)?;
            }
        }
        Ok(())
    }

    pub fn material_model(&self) -> CliResult<MaterialModel> {
        let m = &self.material;
        let model = match m.model {
            MaterialKind::Drude => {
                MaterialModel::drude(ev_to_rad_per_s(m.plasma_frequency_ev), ev_to_rad_per_s(m.damping_ev))
            }
            MaterialKind::Plasma => MaterialModel::plasma(ev_to_rad_per_s(m.plasma_frequency_ev)),
            MaterialKind::Ideal => Ok(MaterialModel::IdealConductor),
        };
        model.map_err(|e| CliError::at_key("material", e))
    }

    pub fn table_grid(&self) -> TableGrid {
        TableGrid {
            min: self.table.min_nm * 1e-9,
            max: self.table.max_nm * 1e-9,
            points: self.table.points,
        }
    }

    /// Builds the library configuration. Frequencies given as "resonant" are
    /// left at zero until [`resolve`] fills them in.
    pub fn system_config(&self, seed: u64) -> CliResult<SystemConfig> {
        let g = &self.geometry;
        let geometry = Geometry::new(g.d1_nm * 1e-9, g.d2_nm * 1e-9, g.r1_um * 1e-6, g.r2_um * 1e-6)
            .map_err(|e| CliError::at_key("geometry", e))?;
        let c = &self.cantilevers;
        let mut cantilevers = Vec::with_capacity(3);
        for i in 0..3 {
            let radius = match i {
                0 => Some(geometry.r1),
                2 => Some(geometry.r2),
                _ => None,
            };
            let p = CantileverParams::from_mass(c.mass_kg[i], hz(c.frequency_hz[i]), hz(c.damping_hz[i]), radius)
                .map_err(|e| CliError::at_key("cantilevers", e))?;
            cantilevers.push(p);
        }
        let md = &self.modulation;
        let cfg = SystemConfig {
            cantilevers: [cantilevers[0], cantilevers[1], cantilevers[2]],
            geometry,
            material: self.material_model()?,
            temperature: self.material.temperature_k,
            table_grid: self.table_grid(),
            modulation: ModulationSettings {
                omega_mod1: md.omega_mod1_hz.placeholder_rad_s(),
                omega_mod2: md.omega_mod2_hz.placeholder_rad_s(),
                delta_d1: md.delta_d1_nm * 1e-9,
                delta_d2: md.delta_d2_nm * 1e-9,
            },
            drive: self.drive.as_ref().map(|d| DriveSettings {
                target: d.target,
                amplitude: d.amplitude_n,
                frequency: d.frequency_hz.placeholder_rad_s(),
                phase: d.phase_rad,
            }),
            gain: hz(self.feedback.gain_hz),
            noise: NoiseSettings {
                enabled: self.noise.enabled,
                temperature: self.noise.temperature_k,
            },
            frequency_shift: md.frequency_shift,
            integrator: IntegratorSettings {
                steps_per_period: self.integrator.steps_per_period,
                stride: self.integrator.sample_stride,
            },
            seed,
        };
        cfg.validate().map_err(|e| CliError::at_key("config", e))?;
        Ok(cfg)
    }

    /// True when some frequency is given as "resonant".
    pub fn needs_resolution(&self) -> bool {
        self.modulation.omega_mod1_hz.is_resonant()
            || self.modulation.omega_mod2_hz.is_resonant()
            || self.drive.as_ref().is_some_and(|d| d.frequency_hz.is_resonant())
    }

    /// Fills in "resonant" frequencies from the mode frequencies of `cfg`,
    /// which depend on its modulation amplitudes.
    pub fn resolve(&self, mut cfg: SystemConfig, tables: &TablePair) -> CliResult<SystemConfig> {
        if !self.needs_resolution() {
            return Ok(cfg);
        }
        let w = cfg.mode_frequencies(tables)?;
        let (m1, m2) = resonant_modulation(w);
        cfg.modulation.omega_mod1 = self.modulation.omega_mod1_hz.resolved(m1);
        cfg.modulation.omega_mod2 = self.modulation.omega_mod2_hz.resolved(m2);
        if let (Some(spec), Some(drive)) = (&self.drive, cfg.drive.as_mut()) {
            drive.frequency = spec.frequency_hz.resolved(w[drive.target - 1]);
        }
        for (key, v) in [
            ("modulation.omega_mod1_hz", cfg.modulation.omega_mod1),
            ("modulation.omega_mod2_hz", cfg.modulation.omega_mod2),
            ("drive.frequency_hz", cfg.drive.map_or(0.0, |d| d.frequency)),
        ] {
            if v < 0.0 {
                return Err(CliError::config(key, format!("resolves to a negative frequency ({} Hz)", v / hz(1.0))));
            }
        }
        cfg.validate().map_err(|e| CliError::at_key("config", e))?;
        Ok(cfg)
    }

    pub fn section<'a, T>(&self, section: &'a Option<T>, name: &str, command: &str) -> CliResult<&'a T> {
        section
            .as_ref()
            .ok_or_else(|| CliError::config(name, format!("section [{name}] is required by {command}")))
    }
}

impl ForceCurveSection {
    /// Swept gaps (nm).
    pub fn values(&self, file: &ConfigFile) -> CliResult<Vec<f64>> {
        let v = exactly_one("force_curve", &[("values_nm", &self.values_nm)], &[("range_nm", &self.range_nm)])?;
        let (lo, hi) = (file.table.min_nm, file.table.max_nm);
        for (i, d) in v.iter().enumerate() {
            if !(*d >= lo && *d <= hi) {
                return Err(CliError::config(
                    format!("force_curve.values_nm[{i}]"),
                    format!("{d} nm lies outside the force table [{lo}, {hi}] nm"),
                ));
            }
        }
        Ok(v)
    }
}

impl EigenSweepSection {
    /// δ₃ values (Hz).
    pub fn delta3_values(&self) -> CliResult<Vec<f64>> {
        exactly_one(
            "eigen_sweep",
            &[("delta3_values_hz", &self.delta3_values_hz)],
            &[("delta3_range_hz", &self.delta3_range_hz)],
        )
    }
}

impl SweepSection {
    pub fn target(&self) -> CliResult<SweepTarget> {
        if self.parameter == "drive_amplitude" {
            return Ok(SweepTarget::DriveAmplitude);
        }
        self.parameter
            .parse::<SweepParameter>()
            .map(SweepTarget::Parameter)
            .map_err(|_| {
                CliError::config(
                    "sweep.parameter",
                    format!(
                        "unknown parameter {:?}; expected omega_mod1, omega_mod2, G, delta_d1, delta_d2 or drive_amplitude",
                        self.parameter
                    ),
                )
            })
    }

    pub fn plan(&self) -> CliResult<SweepPlan> {
        let target = self.target()?;
        let hz_abs = [("values_hz", &self.values_hz)];
        let hz_rel = [("offsets_hz", &self.offsets_hz)];
        let given: Vec<&str> = [
            ("values_hz", self.values_hz.is_some()),
            ("range_hz", self.range_hz.is_some()),
            ("offsets_hz", self.offsets_hz.is_some()),
            ("offset_range_hz", self.offset_range_hz.is_some()),
            ("values_nm", self.values_nm.is_some()),
            ("range_nm", self.range_nm.is_some()),
            ("values_n", self.values_n.is_some()),
            ("range_n", self.range_n.is_some()),
        ]
        .iter()
        .filter(|(_, on)| *on)
        .map(|(k, _)| *k)
        .collect();
        if given.len() != 1 {
            return Err(CliError::config(
                "sweep",
                format!("give exactly one list or range of sweep values, found {:?}", given),
            ));
        }
        let key = given[0];
        let unit_ok = match key {
            "values_hz" | "range_hz" | "offsets_hz" | "offset_range_hz" => target.is_frequency(),
            "values_nm" | "range_nm" => target.is_length(),
            _ => target == SweepTarget::DriveAmplitude,
        };
        if !unit_ok {
            return Err(CliError::config(
                format!("sweep.{key}"),
                format!("unit does not match parameter {}", target.name()),
            ));
        }
        let (values, relative, scale) = match key {
            "values_hz" | "range_hz" => {
                (exactly_one("sweep", &hz_abs, &[("range_hz", &self.range_hz)])?, false, hz(1.0))
            }
            "offsets_hz" | "offset_range_hz" => (
                exactly_one("sweep", &hz_rel, &[("offset_range_hz", &self.offset_range_hz)])?,
                true,
                hz(1.0),
            ),
            "values_nm" | "range_nm" => (
                exactly_one("sweep", &[("values_nm", &self.values_nm)], &[("range_nm", &self.range_nm)])?,
                false,
                1e-9,
            ),
            _ => (
                exactly_one("sweep", &[("values_n", &self.values_n)], &[("range_n", &self.range_n)])?,
                false,
                1.0,
            ),
        };
        if !relative {
            if let Some(i) = values.iter().position(|v| !(*v >= 0.0) || !v.is_finite()) {
                return Err(CliError::config(format!("sweep.{key}[{i}]"), "sweep values must be finite and non-negative"));
            }
        }
        if let Some(r) = self.delta_d2_ratio {
            if target != SweepTarget::Parameter(SweepParameter::DeltaD1) {
                return Err(CliError::config("sweep.delta_d2_ratio", "only applies to delta_d1 sweeps"));
            }
            non_negative("sweep.delta_d2_ratio", r)?;
        }
        Ok(SweepPlan {
            target,
            values: values.into_iter().map(|v| v * scale).collect(),
            relative,
            delta_d2_ratio: self.delta_d2_ratio,
        })
    }
}

/// Dotted key path of the entry on the line containing byte `offset`.
fn key_path_at(text: &str, offset: usize) -> String {
    let offset = offset.min(text.len());
    let mut section = String::new();
    let mut key = String::new();
    let mut start = 0;
    for line in text.split_inclusive('\n') {
        let end = start + line.len();
        let t = line.trim();
        if t.starts_with('[') {
            section = t.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            key.clear();
        } else if let Some((k, _)) = t.split_once('=') {
            key = k.trim().to_string();
        }
        if offset < end || end == text.len() {
            break;
        }
        start = end;
    }
    match (section.is_empty(), key.is_empty()) {
        (true, true) => "config".into(),
        (true, false) => key,
        (false, true) => section,
        (false, false) => format!("{section}.{key}"),
    }
}

fn exactly_one(section: &str, lists: &[(&str, &Option<Vec<f64>>)], ranges: &[(&str, &Option<Range>)]) -> CliResult<Vec<f64>> {
    let mut found = Vec::new();
    for (key, v) in lists {
        if let Some(v) = v {
            for (i, x) in v.iter().enumerate() {
                finite(&format!("{section}.{key}[{i}]"), *x)?;
            }
            found.push(v.clone());
        }
    }
    for (key, r) in ranges {
        if let Some(r) = r {
            found.push(r.values(&format!("{section}.{key}"))?);
        }
    }
    match found.len() {
        1 => Ok(found.pop().unwrap_or_default()),
        0 => Err(CliError::config(section, "no sweep values given")),
        _ => Err(CliError::config(section, "give either a list or a range of values, not both")),
    }
}

fn finite(key: &str, v: f64) -> CliResult<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(CliError::config(key, format!("must be finite, got {v}")))
    }
}

fn positive(key: &str, v: f64) -> CliResult<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::config(key, format!("must be positive, got {v}")))
    }
}

fn non_negative(key: &str, v: f64) -> CliResult<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::config(key, format!("must be non-negative, got {v}")))
    }
}

fn frequency(key: &str, f: Frequency) -> CliResult<()> {
    match f {
        Frequency::Hz(v) => non_negative(key, v),
        Frequency::Keyword(_) => Ok(()),
        Frequency::Offset(o) => finite(key, o.resonant_offset_hz),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[geometry]\nd1_nm = 100\nd2_nm = 105\n";

    #[test]
    fn minimal_file_takes_defaults() {
        let c = ConfigFile::parse(MINIMAL).unwrap();
        c.validate().unwrap();
        assert_eq!(c.cantilevers.mass_kg, [DEFAULT_MASS_KG; 3]);
        assert_eq!(c.material.model, MaterialKind::Drude);
        let cfg = c.system_config(3).unwrap();
        assert_eq!(cfg.seed, 3);
        assert!((cfg.geometry.d1 - 100e-9).abs() < 1e-20);
        assert!((cfg.cantilevers[1].omega - hz(6172.0)).abs() < 1e-9);
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_name() {
        let err = ConfigFile::parse(&format!("{MINIMAL}spacing_nm = 3\n")).unwrap_err();
        let CliError::Config { key, .. } = &err else { panic!("{err}") };
        assert_eq!(key, "geometry.spacing_nm");
        let err = ConfigFile::parse(&format!("{MINIMAL}[modulation]\nfrequency_shift = \"sometimes\"\n")).unwrap_err();
        let CliError::Config { key, .. } = &err else { panic!("{err}") };
        assert_eq!(key, "modulation.frequency_shift");
        assert!(ConfigFile::parse("[geometry]\nd1 = 100\nd2_nm = 105\n").is_err());
    }

    #[test]
    fn resonant_keyword_parses() {
        let c = ConfigFile::parse(&format!(
            "{MINIMAL}[modulation]\nomega_mod1_hz = \"resonant\"\nomega_mod2_hz = 1230.0\n"
        ))
        .unwrap();
        assert_eq!(c.modulation.omega_mod1_hz, Frequency::Keyword(Keyword::Resonant));
        assert_eq!(c.modulation.omega_mod2_hz, Frequency::Hz(1230.0));
        assert!(c.needs_resolution());
        assert!(ConfigFile::parse(&format!("{MINIMAL}[modulation]\nomega_mod1_hz = \"often\"\n")).is_err());
        let off = ConfigFile::parse(&format!("{MINIMAL}[modulation]\nomega_mod2_hz = {{ resonant_offset_hz = -81 }}\n")).unwrap();
        assert_eq!(
            off.modulation.omega_mod2_hz,
            Frequency::Offset(ResonantOffset { resonant_offset_hz: -81.0 })
        );
        assert!((off.modulation.omega_mod2_hz.resolved(hz(1200.0)) - hz(1119.0)).abs() < 1e-9);
    }

    #[test]
    fn violations_name_the_key() {
        let bad = [
            ("[geometry]\nd1_nm = -1\nd2_nm = 105\n", "geometry.d1_nm"),
            ("[geometry]\nd1_nm = 2000\nd2_nm = 105\n", "geometry.d1_nm"),
            (&format!("{MINIMAL}[cantilevers]\nmass_kg = [1e-10, 0, 1e-10]\n"), "cantilevers.mass_kg[1]"),
            (&format!("{MINIMAL}[integrator]\nsteps_per_period = 50\n"), "integrator.steps_per_period"),
            (&format!("{MINIMAL}[modulation]\ndelta_d1_nm = 60\n"), "modulation.delta_d1_nm"),
            (&format!("{MINIMAL}[drive]\ntarget = 4\namplitude_n = 1e-13\n"), "drive.target"),
            (&format!("{MINIMAL}[sweep]\nparameter = \"omega_mod2\"\nvalues_nm = [1.0]\n"), "sweep.values_nm"),
            (&format!("{MINIMAL}[sweep]\nparameter = \"zeta\"\nvalues_hz = [1.0]\n"), "sweep.parameter"),
            (&format!("{MINIMAL}[force_curve]\nmode = \"move_1\"\nvalues_nm = [100, 20]\n"), "force_curve.values_nm[1]"),
        ];
        for (text, want) in bad {
            let err = ConfigFile::parse(text).and_then(|c| c.validate()).unwrap_err();
            match &err {
                CliError::Config { key, .. } => assert_eq!(key, want, "{text}"),
                other => panic!("{other}"),
            }
            assert_eq!(err.exit_code(), 2);
        }
    }

    #[test]
    fn ranges_are_inclusive_and_directional() {
        let r = Range { start: -2.0, stop: 2.0, step: 1.0 };
        assert_eq!(r.values("r").unwrap(), vec![-2.0, -1.0, 0.0, 1.0, 2.0]);
        let back = Range { start: 2.0, stop: -2.0, step: -1.0 };
        assert_eq!(back.values("r").unwrap(), vec![2.0, 1.0, 0.0, -1.0, -2.0]);
        assert!(Range { start: 0.0, stop: 1.0, step: -0.1 }.values("r").is_err());
        assert!(Range { start: 0.0, stop: 1.0, step: 0.0 }.values("r").is_err());
    }

    #[test]
    fn sweep_plans_convert_units() {
        let s = SweepSection {
            parameter: "omega_mod2".into(),
            values_hz: None,
            range_hz: None,
            offsets_hz: Some(vec![-1.0, 0.0]),
            offset_range_hz: None,
            values_nm: None,
            range_nm: None,
            values_n: None,
            range_n: None,
            delta_d2_ratio: None,
        };
        let p = s.plan().unwrap();
        assert!(p.relative);
        assert!((p.values[0] + hz(1.0)).abs() < 1e-12);
        let d = SweepSection {
            parameter: "delta_d1".into(),
            offsets_hz: None,
            values_nm: Some(vec![2.0]),
            delta_d2_ratio: Some(1.42),
            ..s
        };
        let p = d.plan().unwrap();
        assert!((p.values[0] - 2e-9).abs() < 1e-24);
        assert_eq!(p.delta_d2_ratio, Some(1.42));
    }
}
