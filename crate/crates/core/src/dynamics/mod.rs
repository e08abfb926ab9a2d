//! Time-domain integration of the three cantilevers with the full nonlinear
//! Casimir forces, parametric modulation, feedback gain, drive and thermal noise.
//!
//! Displacements are measured from the static equilibrium, so the gaps are
//! d₁ = d₁₀ − s(t) + x₁ − x₂ and d₂ = d₂₀ + s(t) + x₂ − x₃ with
//! s(t) = δ_d1 cos(ω_mod1 t) + δ_d2 cos(ω_mod2 t), and the static Casimir
//! forces at (d₁₀, d₂₀) are balanced by the spring preload.

mod experiments;
mod traces;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::casimir::Geometry;
use crate::error::{Error, Result};
use crate::physics::constants::BOLTZMANN;
use crate::reduced::ModulationSettings;
use crate::system::{SystemConfig, TablePair};

pub use experiments::{
    extract_line, growth_rate, line_frequencies, run_gain_experiment, run_switch_experiment, run_thermal_psd, settle_time,
    ExperimentOptions, ExperimentOutcome, LineAmplitude, MAX_DRIFT,
};
pub use traces::{TraceMetadata, TraceSet};

/// Gap below which the surfaces are considered in contact (m).
pub const CONTACT_GAP: f64 = 10e-9;

/// Modulation offset s(t) of the center cantilever.
#[inline]
pub fn modulation_offset(mods: &ModulationSettings, t: f64) -> f64 {
    mods.delta_d1 * (mods.omega_mod1 * t).cos() + mods.delta_d2 * (mods.omega_mod2 * t).cos()
}

/// Instantaneous gaps for displacements `x` (m) about equilibrium at time `t`.
pub fn instantaneous_gaps(geom: &Geometry, mods: &ModulationSettings, t: f64, x: [f64; 3]) -> Result<(f64, f64)> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical {
            time: t,
            detail: format!("non-finite displacement {x:?}"),
        });
    }
    let s = modulation_offset(mods, t);
    let d1 = geom.d1 - s + x[0] - x[1];
    let d2 = geom.d2 + s + x[1] - x[2];
    if d1 <= 0.0 || d2 <= 0.0 {
        return Err(Error::Contact {
            time: t,
            detail: format!("gaps d1 = {d1:e} m, d2 = {d2:e} m"),
        });
    }
    Ok((d1, d2))
}

/// Position, velocity and noise generator of one run.
#[derive(Debug, Clone)]
pub struct SimulationState {
    pub step: u64,
    pub t: f64,
    /// Displacements from equilibrium (m).
    pub x: [f64; 3],
    pub v: [f64; 3],
    rng: ChaCha8Rng,
    hints: [usize; 2],
}

impl SimulationState {
    pub fn new(x: [f64; 3], v: [f64; 3], seed: u64) -> Self {
        Self {
            step: 0,
            t: 0.0,
            x,
            v,
            rng: ChaCha8Rng::seed_from_u64(seed),
            hints: [0; 2],
        }
    }
}

/// Fixed-step RK4 integrator with Euler–Maruyama noise impulses.
#[derive(Debug, Clone)]
pub struct Simulator {
    config: SystemConfig,
    tables: Option<TablePair>,
    dt: f64,
    active: [bool; 3],
    static_force: [f64; 3],
    stiffness: [f64; 3],
    damping: [f64; 3],
    noise_kick: [f64; 3],
    drive: [f64; 3],
    contact_limit: f64,
    instability: Option<(f64, f64)>,
}

impl Simulator {
    /// Simulator with Casimir forces from `tables`.
    pub fn new(config: &SystemConfig, tables: &TablePair) -> Result<Self> {
        Self::build(config, Some(tables.clone()))
    }

    /// Simulator with the Casimir interaction switched off (independent damped oscillators).
    pub fn without_casimir(config: &SystemConfig) -> Result<Self> {
        Self::build(config, None)
    }

    fn build(config: &SystemConfig, tables: Option<TablePair>) -> Result<Self> {
        config.validate()?;
        let c = &config.cantilevers;
        let g = &config.geometry;
        let static_force = match &tables {
            Some(t) => pair_forces(t.first.force(g.d1)?, t.second.force(g.d2)?),
            None => [0.0; 3],
        };
        let dt = config.time_step();
        let mut damping = [c[0].gamma, c[1].gamma, c[2].gamma];
        damping[1] -= config.gain;
        let noise_kick = std::array::from_fn(|i| {
            if config.noise.enabled {
                (2.0 * BOLTZMANN * config.noise.temperature * c[i].gamma * dt / c[i].mass).sqrt()
            } else {
                0.0
            }
        });
        let mut drive = [0.0; 3];
        if let Some(d) = &config.drive {
            drive[d.target - 1] = d.amplitude / c[d.target - 1].mass;
        }
        Ok(Self {
            config: config.clone(),
            tables,
            dt,
            active: [true; 3],
            static_force,
            stiffness: std::array::from_fn(|i| c[i].omega * c[i].omega),
            damping,
            noise_kick,
            drive,
            contact_limit: 0.5 * g.d1.min(g.d2),
            instability: None,
        })
    }

    /// Holds cantilever `index` (1-based) fixed at its equilibrium.
    pub fn clamp(mut self, index: usize) -> Self {
        self.active[index - 1] = false;
        self
    }

    /// Overrides the step size; it may not exceed the configured maximum.
    pub fn with_dt(mut self, dt: f64) -> Result<Self> {
        let max = self.config.time_step();
        if !(dt > 0.0 && dt <= max * (1.0 + 1e-12)) {
            return Err(Error::precondition(format!("time step {dt:e} s exceeds the maximum {max:e} s")));
        }
        let scale = (dt / self.dt).sqrt();
        self.noise_kick.iter_mut().for_each(|k| *k *= scale);
        self.dt = dt;
        Ok(self)
    }

    /// Displacements beyond `bound` (m) abort with [`Error::Unstable`] carrying `margin`.
    pub fn with_instability_bound(mut self, bound: f64, margin: f64) -> Self {
        self.instability = Some((bound, margin));
        self
    }

    pub fn config(&self) -> &SystemConfig {
        &self.config
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Static displacement of each cantilever from its unloaded rest position (m).
    pub fn equilibrium(&self) -> [f64; 3] {
        let c = &self.config.cantilevers;
        std::array::from_fn(|i| self.static_force[i] / c[i].k_spring)
    }

    /// State at rest on the static equilibrium.
    pub fn initial_state(&self, seed: u64) -> SimulationState {
        SimulationState::new([0.0; 3], [0.0; 3], seed)
    }

    /// State at rest where every spring is unloaded.
    pub fn unloaded_state(&self, seed: u64) -> SimulationState {
        let eq = self.equilibrium();
        let x = std::array::from_fn(|i| if self.active[i] { -eq[i] } else { 0.0 });
        SimulationState::new(x, [0.0; 3], seed)
    }

    /// Casimir force on each cantilever at gaps (d1, d2) minus its static value.
    #[inline]
    fn casimir(&self, t: f64, x: &[f64; 3], hints: &mut [usize; 2]) -> Result<[f64; 3]> {
        let Some(tables) = &self.tables else {
            return Ok([0.0; 3]);
        };
        let g = &self.config.geometry;
        let s = modulation_offset(&self.config.modulation, t);
        let d1 = g.d1 - s + x[0] - x[1];
        let d2 = g.d2 + s + x[1] - x[2];
        let (f1, f2) = match (
            tables.first.force_hinted(d1, &mut hints[0]),
            tables.second.force_hinted(d2, &mut hints[1]),
        ) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                return Err(Error::Numerical {
                    time: t,
                    detail: format!("gaps d1 = {d1:e} m, d2 = {d2:e} m left the force table"),
                })
            }
        };
        let f = pair_forces(f1, f2);
        Ok(std::array::from_fn(|i| f[i] - self.static_force[i]))
    }

    #[inline]
    fn acceleration(&self, t: f64, x: &[f64; 3], v: &[f64; 3], hints: &mut [usize; 2]) -> Result<[f64; 3]> {
        let f = self.casimir(t, x, hints)?;
        let c = &self.config.cantilevers;
        let drive_phase = self
            .config
            .drive
            .as_ref()
            .map(|d| (d.frequency * t + d.phase).cos())
            .unwrap_or(0.0);
        Ok(std::array::from_fn(|i| {
            if !self.active[i] {
                return 0.0;
            }
            -self.stiffness[i] * x[i] - self.damping[i] * v[i] + f[i] / c[i].mass + self.drive[i] * drive_phase
        }))
    }

    /// Advances the state by one RK4 step plus noise impulses.
    pub fn step(&self, state: &mut SimulationState) -> Result<()> {
        let h = self.dt;
        let t = state.t;
        let (x, v) = (state.x, state.v);
        let hints = &mut state.hints;
        let add = |a: &[f64; 3], b: &[f64; 3], s: f64| -> [f64; 3] { std::array::from_fn(|i| a[i] + s * b[i]) };

        let a1 = self.acceleration(t, &x, &v, hints)?;
        let (x2, v2) = (add(&x, &v, 0.5 * h), add(&v, &a1, 0.5 * h));
        let a2 = self.acceleration(t + 0.5 * h, &x2, &v2, hints)?;
        let (x3, v3) = (add(&x, &v2, 0.5 * h), add(&v, &a2, 0.5 * h));
        let a3 = self.acceleration(t + 0.5 * h, &x3, &v3, hints)?;
        let (x4, v4) = (add(&x, &v3, h), add(&v, &a3, h));
        let a4 = self.acceleration(t + h, &x4, &v4, hints)?;

        for i in 0..3 {
            state.x[i] = x[i] + h / 6.0 * (v[i] + 2.0 * v2[i] + 2.0 * v3[i] + v4[i]);
            state.v[i] = v[i] + h / 6.0 * (a1[i] + 2.0 * a2[i] + 2.0 * a3[i] + a4[i]);
        }
        if self.config.noise.enabled {
            for i in 0..3 {
                let n: f64 = StandardNormal.sample(&mut state.rng);
                if self.active[i] {
                    state.v[i] += self.noise_kick[i] * n;
                }
            }
        }
        state.step += 1;
        state.t = state.step as f64 * h;
        self.check(state)
    }

    fn check(&self, state: &SimulationState) -> Result<()> {
        if state.x.iter().chain(&state.v).any(|v| !v.is_finite()) {
            return Err(Error::Numerical {
                time: state.t,
                detail: format!("non-finite state x = {:?}, v = {:?}", state.x, state.v),
            });
        }
        let worst = state.x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if let Some((bound, margin)) = self.instability {
            if worst > bound {
                return Err(Error::Unstable { margin });
            }
        }
        if worst > self.contact_limit {
            return Err(Error::Contact {
                time: state.t,
                detail: format!("displacement {worst:e} m exceeds half the smaller gap"),
            });
        }
        if self.tables.is_some() || self.config.modulation.delta_d1 > 0.0 || self.config.modulation.delta_d2 > 0.0 {
            let (d1, d2) = instantaneous_gaps(&self.config.geometry, &self.config.modulation, state.t, state.x)?;
            if d1 < CONTACT_GAP || d2 < CONTACT_GAP {
                return Err(Error::Contact {
                    time: state.t,
                    detail: format!("gaps d1 = {d1:e} m, d2 = {d2:e} m below {CONTACT_GAP:e} m"),
                });
            }
        }
        Ok(())
    }

    /// Integrates for `duration` seconds without recording.
    pub fn advance(&self, state: &mut SimulationState, duration: f64) -> Result<()> {
        let n = (duration / self.dt).round() as u64;
        for _ in 0..n {
            self.step(state)?;
        }
        Ok(())
    }

    /// Integrates for `duration` seconds, storing every `stride`-th step.
    pub fn record(&self, state: &mut SimulationState, duration: f64, stride: usize, label: &str) -> Result<TraceSet> {
        let n = (duration / self.dt).round() as u64;
        let stride = stride.max(1) as u64;
        let samples = (n / stride) as usize;
        let mut traces: [Vec<f64>; 3] = std::array::from_fn(|_| Vec::with_capacity(samples));
        let start_time = state.t;
        for k in 0..samples as u64 * stride {
            if k % stride == 0 {
                for (trace, x) in traces.iter_mut().zip(state.x) {
                    trace.push(x);
                }
            }
            self.step(state)?;
        }
        Ok(TraceSet {
            sample_rate: 1.0 / (self.dt * stride as f64),
            start_time,
            traces,
            metadata: TraceMetadata {
                label: label.to_string(),
                seed: self.config.seed,
                config: self.config.clone(),
            },
        })
    }
}

/// Forces on the three cantilevers from pair attractions F(d1), F(d2).
#[inline]
pub fn pair_forces(f1: f64, f2: f64) -> [f64; 3] {
    [-f1, f1 - f2, f2]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mods(d1: f64, d2: f64) -> ModulationSettings {
        ModulationSettings {
            omega_mod1: 100.0,
            omega_mod2: 30.0,
            delta_d1: d1,
            delta_d2: d2,
        }
    }

    #[test]
    fn gaps_at_time_zero() {
        let g = Geometry::symmetric(100e-9, 120e-9).unwrap();
        let (d1, d2) = instantaneous_gaps(&g, &mods(5e-9, 3e-9), 0.0, [0.0; 3]).unwrap();
        assert!((d1 - 92e-9).abs() < 1e-20);
        assert!((d2 - 128e-9).abs() < 1e-20);
    }

    #[test]
    fn gaps_without_modulation() {
        let g = Geometry::symmetric(100e-9, 120e-9).unwrap();
        let (d1, d2) = instantaneous_gaps(&g, &mods(0.0, 0.0), 1.234, [0.0; 3]).unwrap();
        assert_eq!((d1, d2), (100e-9, 120e-9));
        let (d1, d2) = instantaneous_gaps(&g, &mods(0.0, 0.0), 0.0, [0.0, 1e-9, 0.0]).unwrap();
        assert!((d1 - 99e-9).abs() < 1e-20);
        assert!((d2 - 121e-9).abs() < 1e-20);
    }

    #[test]
    fn closing_gap_is_contact() {
        let g = Geometry::symmetric(100e-9, 120e-9).unwrap();
        let err = instantaneous_gaps(&g, &mods(0.0, 0.0), 0.5, [-60e-9, 50e-9, 0.0]).unwrap_err();
        assert!(matches!(err, Error::Contact { .. }));
    }

    #[test]
    fn forces_balance() {
        let f = pair_forces(3.0, 1.0);
        assert_eq!(f.iter().sum::<f64>(), 0.0);
        assert_eq!(f, [-3.0, 2.0, 1.0]);
    }
}
