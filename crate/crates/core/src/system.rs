//! Full description of one three-cantilever experiment.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::casimir::{CasimirTable, Geometry, TableGrid};
use crate::error::{Error, Result};
use crate::physics::constants::hz;
use crate::physics::material::MaterialModel;
use crate::reduced::{
    build_reduced_model, mode_frequencies, CantileverParams, FrequencyShift,
    ModulationSettings, ReducedModel,
};

/// Natural frequencies of the three cantilevers (Hz).
pub const NOMINAL_FREQUENCIES_HZ: [f64; 3] = [5661.0, 6172.0, 4892.0];
/// Natural damping rates (Hz).
pub const NOMINAL_DAMPING_HZ: [f64; 3] = [3.22, 6.06, 3.58];

const SILICON_DENSITY: f64 = 2330.0;
const GOLD_DENSITY: f64 = 19_300.0;
const POLYSTYRENE_DENSITY: f64 = 1050.0;
/// Fraction of a uniform cantilever's mass that moves with its tip in the first flexural mode.
const MODAL_MASS_FRACTION: f64 = 0.2427;

/// Modal masses (kg) estimated from the cantilever dimensions: 450×50×2 µm³
/// silicon beams carrying 70 µm gold-coated polystyrene spheres at the tip,
/// and a 500×100×1 µm³ silicon center beam, all with 100 nm gold coatings.
pub fn geometric_mass_estimates() -> [f64; 3] {
    let coat = 100e-9;
    let side_beam = 450e-6 * 50e-6 * 2e-6 * SILICON_DENSITY + 450e-6 * 50e-6 * coat * GOLD_DENSITY;
    let r: f64 = 35e-6;
    let sphere = 4.0 / 3.0 * PI * r.powi(3) * POLYSTYRENE_DENSITY + 4.0 * PI * r * r * coat * GOLD_DENSITY;
    let side = MODAL_MASS_FRACTION * side_beam + sphere;
    let center_beam = 500e-6 * 100e-6 * 1e-6 * SILICON_DENSITY + 2.0 * 500e-6 * 100e-6 * coat * GOLD_DENSITY;
    [side, MODAL_MASS_FRACTION * center_beam, side]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveSettings {
    /// Driven cantilever, 1-based.
    pub target: usize,
    /// Force amplitude (N).
    pub amplitude: f64,
    /// Angular frequency (rad/s).
    pub frequency: f64,
    pub phase: f64,
}

impl DriveSettings {
    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.target) {
            return Err(Error::domain(format!("drive target must be 1, 2 or 3, got {}", self.target)));
        }
        if !(self.amplitude >= 0.0) || !(self.frequency >= 0.0) || !self.phase.is_finite() {
            return Err(Error::domain("drive amplitude and frequency must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseSettings {
    pub enabled: bool,
    /// Bath temperature (K).
    pub temperature: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorSettings {
    /// Steps per period of the fastest cantilever.
    pub steps_per_period: f64,
    /// Integration steps between stored samples.
    pub stride: usize,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        Self {
            steps_per_period: 200.0,
            stride: 25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub cantilevers: [CantileverParams; 3],
    pub geometry: Geometry,
    pub material: MaterialModel,
    /// Temperature of the Casimir force tables (K).
    pub temperature: f64,
    pub table_grid: TableGrid,
    pub modulation: ModulationSettings,
    pub drive: Option<DriveSettings>,
    /// Velocity feedback gain on cantilever 2 (rad/s).
    pub gain: f64,
    pub noise: NoiseSettings,
    pub frequency_shift: FrequencyShift,
    pub integrator: IntegratorSettings,
    pub seed: u64,
}

impl SystemConfig {
    /// Natural frequencies and damping of the three cantilevers with the given masses,
    /// at gaps (d1, d2) with the default spheres and no modulation, drive, gain or noise.
    pub fn with_masses(masses: [f64; 3], d1: f64, d2: f64) -> Result<Self> {
        let geometry = Geometry::symmetric(d1, d2)?;
        let mut cantilevers = [CantileverParams::from_mass(1.0, 1.0, 0.0, None)?; 3];
        for i in 0..3 {
            let radius = match i {
                0 => Some(geometry.r1),
                2 => Some(geometry.r2),
                _ => None,
            };
            cantilevers[i] =
                CantileverParams::from_mass(masses[i], hz(NOMINAL_FREQUENCIES_HZ[i]), hz(NOMINAL_DAMPING_HZ[i]), radius)?;
        }
        Ok(Self {
            cantilevers,
            geometry,
            material: MaterialModel::gold_drude(),
            temperature: 300.0,
            table_grid: TableGrid::default(),
            modulation: ModulationSettings {
                omega_mod1: 0.0,
                omega_mod2: 0.0,
                delta_d1: 0.0,
                delta_d2: 0.0,
            },
            drive: None,
            gain: 0.0,
            noise: NoiseSettings {
                enabled: false,
                temperature: 300.0,
            },
            frequency_shift: FrequencyShift::Static,
            integrator: IntegratorSettings::default(),
            seed: 0,
        })
    }

    pub fn validate(&self) -> Result<()> {
        for c in &self.cantilevers {
            c.validate()?;
            if !(c.gamma >= 0.0) {
                return Err(Error::domain("natural damping rates must be non-negative; use the gain for cantilever 2"));
            }
        }
        self.geometry.validate()?;
        self.material.validate()?;
        if !(self.temperature >= 0.0) {
            return Err(Error::domain("table temperature must be non-negative"));
        }
        self.modulation.validate(&self.geometry)?;
        if let Some(d) = &self.drive {
            d.validate()?;
        }
        if !(self.gain >= 0.0) {
            return Err(Error::domain(format!("gain must be non-negative, got {}", self.gain)));
        }
        if !(self.noise.temperature >= 0.0) {
            return Err(Error::domain("noise temperature must be non-negative"));
        }
        if !(self.integrator.steps_per_period >= 200.0) {
            return Err(Error::precondition(format!(
                "integrator needs at least 200 steps per period, got {}",
                self.integrator.steps_per_period
            )));
        }
        if self.integrator.stride == 0 {
            return Err(Error::domain("sample stride must be at least 1"));
        }
        for (name, gap) in [("d1", self.geometry.d1), ("d2", self.geometry.d2)] {
            let (lo, hi) = (self.table_grid.min, self.table_grid.max);
            let m = self.modulation.delta_d1 + self.modulation.delta_d2;
            if gap - m < lo || gap + m > hi {
                return Err(Error::OutOfRange {
                    quantity: format!("modulated gap {name} (m)"),
                    value: gap,
                    min: lo + m,
                    max: hi - m,
                });
            }
        }
        Ok(())
    }

    /// Cantilever parameters with the feedback gain folded into γ₂.
    pub fn cantilevers_with_gain(&self) -> Result<[CantileverParams; 3]> {
        let mut c = self.cantilevers;
        c[1] = crate::reduced::apply_gain(&c[1], self.gain)?;
        Ok(c)
    }

    /// Highest natural frequency (Hz), which sets the integration step.
    pub fn max_frequency_hz(&self) -> f64 {
        self.cantilevers.iter().map(|c| c.omega).fold(0.0, f64::max) / (2.0 * PI)
    }

    pub fn time_step(&self) -> f64 {
        1.0 / (self.integrator.steps_per_period * self.max_frequency_hz())
    }

    /// Mode frequencies after Casimir softening, as selected by `frequency_shift`.
    pub fn mode_frequencies(&self, tables: &TablePair) -> Result<[f64; 3]> {
        mode_frequencies(&self.cantilevers, tables.pair(), &self.geometry, &self.modulation, self.frequency_shift)
    }

    /// Reduced model with gain applied to cantilever 2.
    pub fn reduced_model(&self, tables: &TablePair) -> Result<ReducedModel> {
        build_reduced_model(
            &self.cantilevers_with_gain()?,
            &self.geometry,
            &self.modulation,
            tables.pair(),
            self.frequency_shift,
        )
    }
}

/// Force tables for the two sphere–plate pairs.
#[derive(Debug, Clone)]
pub struct TablePair {
    pub first: CasimirTable,
    pub second: CasimirTable,
}

impl TablePair {
    /// Builds the Lifshitz table once and rescales it for the second sphere radius.
    pub fn build(cfg: &SystemConfig) -> Result<Self> {
        let first = CasimirTable::build(&cfg.material, cfg.temperature, cfg.geometry.r1, cfg.table_grid)?;
        Self::from_table(first, cfg.geometry.r2)
    }

    pub fn from_table(first: CasimirTable, r2: f64) -> Result<Self> {
        let second = if first.radius() == Some(r2) {
            first.clone()
        } else {
            first.with_radius(r2)?
        };
        Ok(Self { first, second })
    }

    pub fn pair(&self) -> [&CasimirTable; 2] {
        [&self.first, &self.second]
    }
}
