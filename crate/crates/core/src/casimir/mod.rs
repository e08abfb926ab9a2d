//! Sphere–plate Casimir forces in the proximity-force approximation, the
//! additive net force on the center cantilever, and tabulated force curves.
//!
//! Sign conventions: gaps are positive; the force between a sphere–plate pair is
//! reported positive when attractive (so its gradient is negative and its
//! curvature positive); the net force on the center cantilever is positive
//! toward cantilever 1.

mod lifshitz;
mod table;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::constants::{HBAR, SPEED_OF_LIGHT};
use crate::physics::material::MaterialModel;

pub use lifshitz::{
    ideal_energy_per_area, lifshitz_energy_per_area, EnergyDerivatives, LifshitzOutcome, LifshitzSolver,
    MAX_SEPARATION, MIN_SEPARATION,
};
pub use table::{CasimirTable, ForceSample, TableGrid};

/// Smallest sphere radius to separation ratio accepted by the PFA.
pub const PFA_MIN_RATIO: f64 = 10.0;

/// Room temperature used for the thermal-fraction comparison (K).
pub const ROOM_TEMPERATURE: f64 = 300.0;

/// Default sphere radius (m): 70 µm diameter spheres.
pub const DEFAULT_SPHERE_RADIUS: f64 = 35e-6;

/// Gaps and sphere radii of the three-cantilever stack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    /// Gap between cantilevers 1 and 2 (m).
    pub d1: f64,
    /// Gap between cantilevers 2 and 3 (m).
    pub d2: f64,
    /// Sphere radius on cantilever 1 (m).
    pub r1: f64,
    /// Sphere radius on cantilever 3 (m).
    pub r2: f64,
}

impl Geometry {
    pub fn new(d1: f64, d2: f64, r1: f64, r2: f64) -> Result<Self> {
        let g = Self { d1, d2, r1, r2 };
        g.validate()?;
        Ok(g)
    }

    /// Equal spheres of the default radius.
    pub fn symmetric(d1: f64, d2: f64) -> Result<Self> {
        Self::new(d1, d2, DEFAULT_SPHERE_RADIUS, DEFAULT_SPHERE_RADIUS)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, d) in [("d1", self.d1), ("d2", self.d2)] {
            if !(MIN_SEPARATION..=MAX_SEPARATION).contains(&d) {
                return Err(Error::OutOfRange {
                    quantity: format!("gap {name} (m)"),
                    value: d,
                    min: MIN_SEPARATION,
                    max: MAX_SEPARATION,
                });
            }
        }
        for (name, r) in [("r1", self.r1), ("r2", self.r2)] {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::domain(format!("sphere radius {name} must be positive, got {r}")));
            }
        }
        check_pfa(self.r1, self.d1)?;
        check_pfa(self.r2, self.d2)
    }
}

fn check_pfa(radius: f64, x: f64) -> Result<()> {
    if radius / x < PFA_MIN_RATIO {
        return Err(Error::precondition(format!(
            "proximity-force approximation needs R/x ≥ {PFA_MIN_RATIO}, got R = {radius:e} m, x = {x:e} m"
        )));
    }
    Ok(())
}

/// Ideal-conductor sphere–plate force π³ħcR/(360x³) (N, attractive positive).
pub fn ideal_pfa_force(radius: f64, x: f64) -> f64 {
    PI.powi(3) * HBAR * SPEED_OF_LIGHT * radius / (360.0 * x.powi(3))
}

/// Sphere–plate force −2πR·E(x, T) (N); positive values are attractive.
pub fn pfa_sphere_plate_force(material: &MaterialModel, radius: f64, x: f64, temperature: f64) -> Result<f64> {
    if !(radius > 0.0) {
        return Err(Error::domain(format!("sphere radius must be positive, got {radius}")));
    }
    check_pfa(radius, x)?;
    Ok(-2.0 * PI * radius * lifshitz_energy_per_area(material, x, temperature)?)
}

/// Closed-form ideal-conductor net force on the center cantilever (N, positive toward cantilever 1).
pub fn ideal_net_force_center(geom: &Geometry) -> f64 {
    ideal_pfa_force(geom.r1, geom.d1) - ideal_pfa_force(geom.r2, geom.d2)
}

/// Additive net force on the center cantilever from two tabulated pair forces
/// (N, positive toward cantilever 1). `table1` describes the d1 pair, `table2` the d2 pair.
pub fn net_force_center(table1: &CasimirTable, table2: &CasimirTable, geom: &Geometry) -> Result<f64> {
    let f1 = table1.force(geom.d1).map_err(|e| rename_gap(e, "d1"))?;
    let f2 = table2.force(geom.d2).map_err(|e| rename_gap(e, "d2"))?;
    Ok(f1 - f2)
}

fn rename_gap(e: Error, gap: &str) -> Error {
    match e {
        Error::OutOfRange { value, min, max, .. } => Error::OutOfRange {
            quantity: format!("gap {gap} (m)"),
            value,
            min,
            max,
        },
        other => other,
    }
}

/// First and second separation derivatives of a table's force interpolant (N/m, N/m²).
pub fn force_derivatives(table: &CasimirTable, x: f64) -> Result<(f64, f64)> {
    table.derivatives(x)
}

/// Relative size of the room-temperature correction, |F(x,300K) − F(x,0)| / |F(x,300K)|.
pub fn thermal_fraction(material: &MaterialModel, x: f64) -> Result<f64> {
    thermal_fraction_between(material, x, 0.0, ROOM_TEMPERATURE)
}

/// |F(x,T_hot) − F(x,T_cold)| / |F(x,T_hot)| for the plate–plate energy, which the PFA
/// maps onto the sphere–plate force without changing the ratio.
pub fn thermal_fraction_between(material: &MaterialModel, x: f64, t_cold: f64, t_hot: f64) -> Result<f64> {
    if x > 1e-6 {
        return Err(Error::OutOfRange {
            quantity: "separation (m)".into(),
            value: x,
            min: MIN_SEPARATION,
            max: 1e-6,
        });
    }
    if t_cold == t_hot {
        return Ok(0.0);
    }
    let hot = lifshitz_energy_per_area(material, x, t_hot)?;
    let cold = lifshitz_energy_per_area(material, x, t_cold)?;
    Ok(((hot - cold) / hot).abs())
}
