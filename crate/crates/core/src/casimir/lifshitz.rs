//! Lifshitz energy per unit area between two half-spaces and its first two
//! separation derivatives.
//!
//! The k⊥ integral is taken over u = 2xq, q = √(k⊥² + ξ²/c²), so that
//! k⊥ dk⊥ = u du / 4x² and the integrand decays as e^{−u}. Separation
//! derivatives are computed from the integrand directly: each ∂/∂x brings down
//! a factor −2q = −u/x on e^{−2xq}.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::physics::constants::{BOLTZMANN, HBAR, SPEED_OF_LIGHT};
use crate::physics::material::{Fresnel, MaterialModel, MatsubaraGrid};
use crate::quadrature::{integrate, Tolerance};

pub const MIN_SEPARATION: f64 = 1e-9;
pub const MAX_SEPARATION: f64 = 1e-5;

/// Width of the u-window past the lower limit; e^{−40} ≈ 4e-18.
const TAIL: f64 = 40.0;
const INNER_PANELS: [f64; 6] = [0.0, 0.5, 2.0, 6.0, 15.0, TAIL];
const OUTER_PANELS: [f64; 7] = [0.0, 0.25, 1.0, 3.0, 8.0, 18.0, TAIL];

/// E, ∂E/∂x and ∂²E/∂x² per unit area (J/m², J/m³, J/m⁴).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyDerivatives {
    pub energy: f64,
    pub first: f64,
    pub second: f64,
}

impl EnergyDerivatives {
    fn scaled(self, s: f64) -> Self {
        Self {
            energy: self.energy * s,
            first: self.first * s,
            second: self.second * s,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LifshitzSolver {
    pub quadrature: Tolerance,
    /// A Matsubara term is negligible once it is below this fraction of the running sum.
    pub matsubara_rel: f64,
    /// Number of consecutive negligible terms before the sum stops.
    pub consecutive: usize,
    pub max_terms: usize,
}

impl Default for LifshitzSolver {
    fn default() -> Self {
        Self {
            quadrature: Tolerance {
                abs: 0.0,
                rel: 1e-10,
                max_intervals: 400,
            },
            matsubara_rel: 1e-10,
            consecutive: 3,
            max_terms: 5000,
        }
    }
}

/// Result of a Lifshitz evaluation, including how many Matsubara terms were used
/// (zero for the T = 0 frequency integral).
#[derive(Debug, Clone, Copy)]
pub struct LifshitzOutcome {
    pub derivatives: EnergyDerivatives,
    pub terms: usize,
}

fn check_separation(x: f64) -> Result<()> {
    if (MIN_SEPARATION..=MAX_SEPARATION).contains(&x) {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            quantity: "separation (m)".into(),
            value: x,
            min: MIN_SEPARATION,
            max: MAX_SEPARATION,
        })
    }
}

/// ∫ over u ∈ [u0, u0 + TAIL] of the three dimensionless integrands
/// u·Σ ln(1−y), u²·Σ y/(1−y), −u³·Σ y/(1−y)² with y = r² e^{−u}.
fn k_integral(fresnel: &Fresnel, x: f64, u0: f64, tol: Tolerance) -> Result<[f64; 3]> {
    let inv_2x = 0.5 / x;
    let integrand = |u: f64| -> [f64; 3] {
        let (r_te, r_tm) = fresnel.at_q(u * inv_2x);
        let decay = (-u).exp();
        let em1 = (-u).exp_m1();
        let mut log_sum = 0.0;
        let mut first = 0.0;
        let mut second = 0.0;
        for r in [r_te, r_tm] {
            let r2 = r * r;
            if r2 == 0.0 {
                continue;
            }
            let y = r2 * decay;
            // 1 − r² e^{−u} without cancellation when r → 1 and u → 0
            let one_minus = (1.0 - r2) - r2 * em1;
            log_sum += if y < 0.5 { (-y).ln_1p() } else { one_minus.ln() };
            first += y / one_minus;
            second += y / (one_minus * one_minus);
        }
        [u * log_sum, u * u * first, -u * u * u * second]
    };
    let breaks: Vec<f64> = INNER_PANELS.iter().map(|b| u0 + b).collect();
    integrate(integrand, &breaks, tol).map(|e| e.value)
}

impl LifshitzSolver {
    pub fn energy_per_area(&self, material: &MaterialModel, x: f64, temperature: f64) -> Result<f64> {
        self.derivatives(material, x, temperature)
            .map(|o| o.derivatives.energy)
    }

    pub fn derivatives(
        &self,
        material: &MaterialModel,
        x: f64,
        temperature: f64,
    ) -> Result<LifshitzOutcome> {
        check_separation(x)?;
        if !(temperature >= 0.0 && temperature.is_finite()) {
            return Err(Error::domain(format!("temperature must be ≥ 0, got {temperature}")));
        }
        if temperature == 0.0 {
            self.zero_temperature(material, x)
        } else {
            self.matsubara_sum(material, x, temperature)
        }
    }

    fn matsubara_sum(&self, material: &MaterialModel, x: f64, temperature: f64) -> Result<LifshitzOutcome> {
        let grid = MatsubaraGrid::new(temperature)?;
        let mut sum = [0.0f64; 3];
        let mut quiet = 0;
        let mut last = [0.0f64; 3];
        for l in 0..self.max_terms {
            let xi = grid.frequency(l);
            let u0 = 2.0 * x * xi / SPEED_OF_LIGHT;
            let fresnel = Fresnel::new(material, xi)?;
            let term = k_integral(&fresnel, x, u0, self.quadrature)?;
            let w = grid.weight(l);
            for i in 0..3 {
                last[i] = w * term[i];
                sum[i] += last[i];
            }
            let negligible = (0..3).all(|i| last[i].abs() < self.matsubara_rel * sum[i].abs());
            quiet = if negligible { quiet + 1 } else { 0 };
            if quiet >= self.consecutive {
                let pref = BOLTZMANN * temperature / (2.0 * PI) / (4.0 * x * x);
                let d = EnergyDerivatives {
                    energy: sum[0],
                    first: sum[1] / x,
                    second: sum[2] / (x * x),
                }
                .scaled(pref);
                return Ok(LifshitzOutcome {
                    derivatives: d,
                    terms: l + 1,
                });
            }
        }
        Err(Error::Matsubara {
            terms: self.max_terms,
            last_term: last[0],
            sum: sum[0],
        })
    }

    fn zero_temperature(&self, material: &MaterialModel, x: f64) -> Result<LifshitzOutcome> {
        // ξ = c u0 / 2x; the ξ-integral replaces (k_B T/2π) Σ′ with (ħ/4π²) ∫ dξ.
        let inner_tol = Tolerance {
            rel: self.quadrature.rel * 0.1,
            ..self.quadrature
        };
        let mut failure = None;
        let outer = |u0: f64| -> [f64; 3] {
            let xi = SPEED_OF_LIGHT * u0 / (2.0 * x);
            match Fresnel::new(material, xi).and_then(|f| k_integral(&f, x, u0, inner_tol)) {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    [0.0; 3]
                }
            }
        };
        let est = integrate(outer, &OUTER_PANELS, self.quadrature)?;
        if let Some(e) = failure {
            return Err(e);
        }
        let pref = HBAR * SPEED_OF_LIGHT / (32.0 * PI * PI * x * x * x);
        let d = EnergyDerivatives {
            energy: est.value[0],
            first: est.value[1] / x,
            second: est.value[2] / (x * x),
        }
        .scaled(pref);
        Ok(LifshitzOutcome {
            derivatives: d,
            terms: 0,
        })
    }
}

/// Lifshitz energy per unit area E(x, T) (J/m²) with the default solver settings.
pub fn lifshitz_energy_per_area(material: &MaterialModel, x: f64, temperature: f64) -> Result<f64> {
    LifshitzSolver::default().energy_per_area(material, x, temperature)
}

/// Ideal-conductor plate–plate energy at T = 0: −π²ħc / (720 x³).
pub fn ideal_energy_per_area(x: f64) -> f64 {
    -PI * PI * HBAR * SPEED_OF_LIGHT / (720.0 * x.powi(3))
}
