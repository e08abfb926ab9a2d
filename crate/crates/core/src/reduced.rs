//! Rotating-frame three-mode model of the parametrically coupled cantilevers.
//!
//! With c_i the normalized slow amplitudes, i ċ = H c where
//!
//! ```text
//!     ⎡ −iγ₁/2      g₁₂/2          0         ⎤
//! H = ⎢ g₁₂/2    −iγ₂/2 − δ₂     g₂₃/2       ⎥
//!     ⎣   0         g₂₃/2     −iγ₃/2 − δ₃    ⎦
//! ```
//!
//! so a mode e^{−iλt} decays when Im λ < 0.

use std::f64::consts::SQRT_2;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::casimir::{CasimirTable, Geometry};
use crate::error::{Error, Result};

/// Relative tolerance on k = mω² at construction.
pub const SPRING_TOLERANCE: f64 = 1e-6;

/// Detunings below this fraction of ω₂ count as resonant.
pub const RESONANCE_TOLERANCE: f64 = 1e-6;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CantileverParams {
    /// Effective modal mass (kg).
    pub mass: f64,
    /// Natural angular frequency (rad/s).
    pub omega: f64,
    /// Energy damping rate (rad/s); negative once gain exceeds the natural damping.
    pub gamma: f64,
    /// Spring constant (N/m).
    pub k_spring: f64,
    /// Radius of the sphere carried by this cantilever, if any (m).
    pub sphere_radius: Option<f64>,
}

impl CantileverParams {
    pub fn new(mass: f64, omega: f64, gamma: f64, k_spring: f64, sphere_radius: Option<f64>) -> Result<Self> {
        let p = Self {
            mass,
            omega,
            gamma,
            k_spring,
            sphere_radius,
        };
        p.validate()?;
        Ok(p)
    }

    /// Parameters with k = mω².
    pub fn from_mass(mass: f64, omega: f64, gamma: f64, sphere_radius: Option<f64>) -> Result<Self> {
        Self::new(mass, omega, gamma, mass * omega * omega, sphere_radius)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0 && self.omega > 0.0 && self.k_spring > 0.0) {
            return Err(Error::domain(format!(
                "mass, omega and k_spring must be positive, got {self:?}"
            )));
        }
        if !self.gamma.is_finite() {
            return Err(Error::domain("damping rate must be finite"));
        }
        let k = self.mass * self.omega * self.omega;
        if ((self.k_spring - k) / k).abs() > SPRING_TOLERANCE {
            return Err(Error::domain(format!(
                "k_spring = {} N/m differs from m·ω² = {k} N/m",
                self.k_spring
            )));
        }
        if let Some(r) = self.sphere_radius {
            if !(r > 0.0) {
                return Err(Error::domain(format!("sphere radius must be positive, got {r}")));
            }
        }
        Ok(())
    }

    /// Same oscillator with a different angular frequency (spring constant follows).
    pub fn with_omega(&self, omega: f64) -> Self {
        Self {
            omega,
            k_spring: self.mass * omega * omega,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulationSettings {
    pub omega_mod1: f64,
    pub omega_mod2: f64,
    /// Modulation amplitude at ω_mod1 (m).
    pub delta_d1: f64,
    /// Modulation amplitude at ω_mod2 (m).
    pub delta_d2: f64,
}

impl ModulationSettings {
    pub fn validate(&self, geom: &Geometry) -> Result<()> {
        if !(self.delta_d1 >= 0.0 && self.delta_d2 >= 0.0) {
            return Err(Error::domain("modulation amplitudes must be non-negative"));
        }
        if !(self.omega_mod1 >= 0.0 && self.omega_mod2 >= 0.0) {
            return Err(Error::domain("modulation frequencies must be non-negative"));
        }
        let half_gap = 0.5 * geom.d1.min(geom.d2);
        if self.delta_d1 >= half_gap || self.delta_d2 >= half_gap {
            return Err(Error::precondition(format!(
                "modulation amplitudes ({:e}, {:e}) m must stay below half the smaller gap ({half_gap:e} m)",
                self.delta_d1, self.delta_d2
            )));
        }
        Ok(())
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            delta_d1: self.delta_d1 * s,
            delta_d2: self.delta_d2 * s,
            ..*self
        }
    }
}

/// How Casimir softening enters the mode frequencies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrequencyShift {
    /// Bare frequencies.
    #[default]
    None,
    /// ω√(1 − (∂F/∂x)/k) with the gradient at the static gaps.
    Static,
    /// As `Static`, with the gradient averaged over the modulation cycle.
    ModulationAveraged,
    /// Normal-mode frequencies of the full static stiffness matrix, including
    /// the off-diagonal Casimir terms, with the modulation-averaged gradients.
    NormalModes,
}

impl From<bool> for FrequencyShift {
    fn from(on: bool) -> Self {
        if on {
            FrequencyShift::Static
        } else {
            FrequencyShift::None
        }
    }
}

/// Diagonal stiffness added by the Casimir forces, ∂F_i/∂x_i (N/m), for pair
/// gradients `g1 = F′(d1)` and `g2 = F′(d2)` of the attraction magnitude.
pub fn casimir_stiffness(g1: f64, g2: f64) -> [f64; 3] {
    [-g1, -g1 - g2, -g2]
}

/// Pair gradients F′(d1), F′(d2) for the chosen softening mode.
pub fn pair_gradients(
    tables: [&CasimirTable; 2],
    geom: &Geometry,
    mods: &ModulationSettings,
    shift: FrequencyShift,
) -> Result<(f64, f64)> {
    match shift {
        FrequencyShift::None => Ok((0.0, 0.0)),
        FrequencyShift::Static => Ok((tables[0].derivatives(geom.d1)?.0, tables[1].derivatives(geom.d2)?.0)),
        FrequencyShift::ModulationAveraged | FrequencyShift::NormalModes => {
            // trapezoid over both modulation phases; spectrally exact for smooth periodic integrands
            const N: usize = 32;
            let mut sum = (0.0, 0.0);
            for a in 0..N {
                let c1 = (std::f64::consts::TAU * a as f64 / N as f64).cos();
                for b in 0..N {
                    let c2 = (std::f64::consts::TAU * b as f64 / N as f64).cos();
                    let s = mods.delta_d1 * c1 + mods.delta_d2 * c2;
                    sum.0 += tables[0].derivatives(geom.d1 - s)?.0;
                    sum.1 += tables[1].derivatives(geom.d2 + s)?.0;
                }
            }
            let n = (N * N) as f64;
            Ok((sum.0 / n, sum.1 / n))
        }
    }
}

/// Frequencies after Casimir softening, ω_i √(1 − (∂F_i/∂x_i)/k_i).
pub fn effective_frequencies(cants: &[CantileverParams; 3], gradients: (f64, f64)) -> Result<[f64; 3]> {
    let stiff = casimir_stiffness(gradients.0, gradients.1);
    let mut out = [0.0; 3];
    for i in 0..3 {
        let r = 1.0 - stiff[i] / cants[i].k_spring;
        if !(r > 0.0) {
            return Err(Error::Unstable { margin: r });
        }
        out[i] = cants[i].omega * r.sqrt();
    }
    Ok(out)
}

/// Frequencies of the normal modes of the coupled static stiffness matrix,
/// each assigned to the cantilever whose bare frequency it is closest to.
pub fn normal_mode_frequencies(cants: &[CantileverParams; 3], gradients: (f64, f64)) -> Result<[f64; 3]> {
    let (g1, g2) = gradients;
    // K = diag(k) − ∂F/∂x
    let k = Matrix3::new(
        cants[0].k_spring + g1,
        -g1,
        0.0,
        -g1,
        cants[1].k_spring + g1 + g2,
        -g2,
        0.0,
        -g2,
        cants[2].k_spring + g2,
    );
    let s = Matrix3::from_diagonal(&Vector3::new(
        cants[0].mass.sqrt().recip(),
        cants[1].mass.sqrt().recip(),
        cants[2].mass.sqrt().recip(),
    ));
    let eig = SymmetricEigen::new(s * k * s);
    if let Some(&w2) = eig.eigenvalues.iter().find(|&&w2| !(w2 > 0.0)) {
        return Err(Error::Unstable { margin: w2 });
    }
    let mut modes: Vec<f64> = eig.eigenvalues.iter().map(|w2| w2.sqrt()).collect();
    let mut out = [0.0; 3];
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| cants[a].omega.total_cmp(&cants[b].omega));
    modes.sort_by(f64::total_cmp);
    for (slot, &i) in order.iter().enumerate() {
        out[i] = modes[slot];
    }
    Ok(out)
}

/// Mode frequencies used by the reduced model for the chosen softening.
pub fn mode_frequencies(
    cants: &[CantileverParams; 3],
    tables: [&CasimirTable; 2],
    geom: &Geometry,
    mods: &ModulationSettings,
    shift: FrequencyShift,
) -> Result<[f64; 3]> {
    let g = pair_gradients(tables, geom, mods, shift)?;
    match shift {
        FrequencyShift::NormalModes => normal_mode_frequencies(cants, g),
        _ => effective_frequencies(cants, g),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedModel {
    pub h: Matrix3<Complex64>,
    pub g12: f64,
    pub g23: f64,
    pub delta2: f64,
    pub delta3: f64,
    /// Λ₁ = F″(d₁₀)δ_d1 (N/m).
    pub lambda1: f64,
    /// Λ₂ = F″(d₂₀)δ_d2 (N/m).
    pub lambda2: f64,
    /// Damping rates on the diagonal (rad/s).
    pub gammas: [f64; 3],
    /// Mode frequencies used for g and δ (rad/s).
    pub omegas: [f64; 3],
}

/// Assembles H from its parameters.
pub fn hamiltonian(gammas: [f64; 3], g12: f64, g23: f64, delta2: f64, delta3: f64) -> Matrix3<Complex64> {
    let c = |re: f64| Complex64::new(re, 0.0);
    Matrix3::new(
        -I * gammas[0] / 2.0,
        c(g12 / 2.0),
        c(0.0),
        c(g12 / 2.0),
        -I * gammas[1] / 2.0 - delta2,
        c(g23 / 2.0),
        c(0.0),
        c(g23 / 2.0),
        -I * gammas[2] / 2.0 - delta3,
    )
}

impl ReducedModel {
    /// Model specified directly by couplings and detunings (Λ's and ω's unset).
    pub fn from_parts(gammas: [f64; 3], g12: f64, g23: f64, delta2: f64, delta3: f64) -> Self {
        Self {
            h: hamiltonian(gammas, g12, g23, delta2, delta3),
            g12,
            g23,
            delta2,
            delta3,
            lambda1: 0.0,
            lambda2: 0.0,
            gammas,
            omegas: [0.0; 3],
        }
    }

    /// Same model with new detunings.
    pub fn with_detunings(&self, delta2: f64, delta3: f64) -> Self {
        Self {
            h: hamiltonian(self.gammas, self.g12, self.g23, delta2, delta3),
            delta2,
            delta3,
            ..self.clone()
        }
    }

    /// Same model with new damping rates.
    pub fn with_gammas(&self, gammas: [f64; 3]) -> Self {
        Self {
            h: hamiltonian(gammas, self.g12, self.g23, self.delta2, self.delta3),
            gammas,
            ..self.clone()
        }
    }

    pub fn is_resonant(&self) -> bool {
        let scale = if self.omegas[1] > 0.0 { self.omegas[1] } else { 1.0 };
        self.delta2.abs() <= RESONANCE_TOLERANCE * scale && self.delta3.abs() <= RESONANCE_TOLERANCE * scale
    }
}

/// Builds H from cantilever parameters, static gaps, modulation and the two pair tables.
pub fn build_reduced_model(
    cants: &[CantileverParams; 3],
    geom: &Geometry,
    mods: &ModulationSettings,
    tables: [&CasimirTable; 2],
    shift: FrequencyShift,
) -> Result<ReducedModel> {
    for c in cants {
        c.validate()?;
    }
    geom.validate()?;
    mods.validate(geom)?;
    let (_, curv1) = tables[0].derivatives(geom.d1)?;
    let (_, curv2) = tables[1].derivatives(geom.d2)?;
    let omegas = mode_frequencies(cants, tables, geom, mods, shift)?;
    let lambda1 = curv1 * mods.delta_d1;
    let lambda2 = curv2 * mods.delta_d2;
    let [m1, m2, m3] = [cants[0].mass, cants[1].mass, cants[2].mass];
    let [w1, w2, w3] = omegas;
    let g12 = lambda1 / (2.0 * (m1 * m2 * w1 * w2).sqrt());
    let g23 = lambda2 / (2.0 * (m2 * m3 * w2 * w3).sqrt());
    let delta2 = w1 + mods.omega_mod1 - w2;
    let delta3 = w1 + mods.omega_mod1 - mods.omega_mod2 - w3;
    let gammas = [cants[0].gamma, cants[1].gamma, cants[2].gamma];
    Ok(ReducedModel {
        h: hamiltonian(gammas, g12, g23, delta2, delta3),
        g12,
        g23,
        delta2,
        delta3,
        lambda1,
        lambda2,
        gammas,
        omegas,
    })
}

/// Modulation frequencies that zero both detunings for the given mode frequencies.
pub fn resonant_modulation(omegas: [f64; 3]) -> (f64, f64) {
    (omegas[1] - omegas[0], omegas[1] - omegas[2])
}

fn sort_eigenvalues(v: &mut [Complex64; 3]) {
    v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}

/// Eigenvalues of H (rad/s), sorted by real part then imaginary part.
///
/// Roots of the characteristic cubic by Cardano's formula, each polished with
/// Newton steps on the same polynomial.
pub fn eigenvalues(model: &ReducedModel) -> [Complex64; 3] {
    let scale = model.h.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return [Complex64::new(0.0, 0.0); 3];
    }
    let h = model.h / Complex64::new(scale, 0.0);
    // det(λI − H) = λ³ + aλ² + bλ + c
    let a = -h.trace();
    let b = h[(0, 0)] * h[(1, 1)] + h[(0, 0)] * h[(2, 2)] + h[(1, 1)] * h[(2, 2)]
        - h[(0, 1)] * h[(1, 0)]
        - h[(0, 2)] * h[(2, 0)]
        - h[(1, 2)] * h[(2, 1)];
    let c = -h.determinant();
    let mut v = cubic_roots(a, b, c).map(|z| z * scale);
    sort_eigenvalues(&mut v);
    v
}

fn cubic_roots(a: Complex64, b: Complex64, c: Complex64) -> [Complex64; 3] {
    let poly = |z: Complex64| ((z + a) * z + b) * z + c;
    let dpoly = |z: Complex64| (3.0 * z + 2.0 * a) * z + b;
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    let disc = (q * q / 4.0 + p * p * p / 27.0).sqrt();
    let (u1, u2) = (-q / 2.0 + disc, -q / 2.0 - disc);
    let u = if u1.norm() >= u2.norm() { u1 } else { u2 }.powf(1.0 / 3.0);
    let shift = -a / 3.0;
    let omega = Complex64::new(-0.5, 3f64.sqrt() / 2.0);
    let mut roots = [shift; 3];
    if u.norm() > 0.0 {
        let mut w = Complex64::new(1.0, 0.0);
        for r in roots.iter_mut() {
            let t = u * w;
            *r = t - p / (3.0 * t) + shift;
            w *= omega;
        }
    }
    for r in roots.iter_mut() {
        for _ in 0..3 {
            let f = poly(*r);
            let df = dpoly(*r);
            if df.norm() == 0.0 {
                break;
            }
            let next = *r - f / df;
            if poly(next).norm() < f.norm() {
                *r = next;
            } else {
                break;
            }
        }
    }
    roots
}

/// Right eigenvector for eigenvalue `lambda`, normalized to unit length.
pub fn eigenvector(h: &Matrix3<Complex64>, lambda: Complex64) -> Vector3<Complex64> {
    let a = h - Matrix3::identity() * lambda;
    let rows = [a.row(0).transpose(), a.row(1).transpose(), a.row(2).transpose()];
    // null vector as the largest cross product of two rows of H − λI
    let mut best = Vector3::zeros();
    let mut best_norm = -1.0;
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        let (r, s) = (&rows[i], &rows[j]);
        let v = Vector3::new(
            r[1] * s[2] - r[2] * s[1],
            r[2] * s[0] - r[0] * s[2],
            r[0] * s[1] - r[1] * s[0],
        );
        let n = v.norm();
        if n > best_norm {
            best_norm = n;
            best = v;
        }
    }
    if best_norm <= 0.0 {
        // H − λI vanishes identically; any vector is an eigenvector
        return Vector3::new(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
    }
    best / Complex64::new(best_norm, 0.0)
}

/// Eigenvalues with their unit eigenvectors, in [`eigenvalues`] order.
pub fn eigensystem(model: &ReducedModel) -> [(Complex64, Vector3<Complex64>); 3] {
    eigenvalues(model).map(|l| (l, eigenvector(&model.h, l)))
}

/// Closed-form eigenvalues for g₁₂ = g₂₃ = g, γ₁ = γ₃ and zero detunings,
/// in the order (λ₁, λ₂, λ₃).
pub fn symmetric_eigenvalues(g: f64, gamma1: f64, gamma2: f64) -> [Complex64; 3] {
    let root = Complex64::new(8.0 * g * g - (gamma1 - gamma2).powi(2), 0.0).sqrt() / 4.0;
    let base = -I * (gamma1 + gamma2) / 4.0;
    [-I * gamma1 / 2.0, base + root, base - root]
}

/// Closed-form steady-state condition for the symmetric case.
pub fn symmetric_is_stable(g: f64, gamma1: f64, gamma2: f64) -> bool {
    let (sum, diff) = (gamma1 + gamma2, (gamma1 - gamma2).abs());
    if gamma1 <= 0.0 {
        return false;
    }
    if g.abs() > diff / (2.0 * SQRT_2) {
        sum > 0.0
    } else {
        sum - (diff * diff - 8.0 * g * g).sqrt() > 0.0
    }
}

/// Coupling at which the symmetric system crosses the closed-form stability boundary,
/// or `None` if no such g exists for these dampings.
pub fn symmetric_threshold(gamma1: f64, gamma2: f64) -> Option<f64> {
    // below |γ₁ − γ₂|/2√2, Im λ₂ = 0 at 8g² = (γ₁−γ₂)² − (γ₁+γ₂)² = −4γ₁γ₂
    if gamma1 > 0.0 && gamma2 < 0.0 && gamma1 + gamma2 > 0.0 {
        Some((-gamma1 * gamma2 / 2.0).sqrt())
    } else {
        None
    }
}

/// Steady-state |B₃/B₁| with cantilever 1 held at a fixed amplitude, from the
/// unnormalized amplitude equations (valid off resonance as well).
pub fn steady_state_ratio(model: &ReducedModel, cants: &[CantileverParams; 3]) -> Result<f64> {
    let [_, w2, w3] = omega_or_bare(model, cants);
    let (m2, m3) = (cants[1].mass, cants[2].mass);
    let a21 = model.lambda1 / (4.0 * m2 * w2);
    let a23 = model.lambda2 / (4.0 * m2 * w2);
    let a32 = model.lambda2 / (4.0 * m3 * w3);
    let d2 = -I * model.gammas[1] / 2.0 - model.delta2;
    let d3 = -I * model.gammas[2] / 2.0 - model.delta3;
    // row 3: a32 B2 + d3 B3 = 0; row 2: a21 B1 + d2 B2 + a23 B3 = 0
    let denom = d2 * d3 - a23 * a32;
    if denom.norm() == 0.0 {
        return Err(Error::Numerical {
            time: 0.0,
            detail: "steady state is singular (zero damping on resonance)".into(),
        });
    }
    Ok((a21 * a32 / denom).norm())
}

fn omega_or_bare(model: &ReducedModel, cants: &[CantileverParams; 3]) -> [f64; 3] {
    if model.omegas.iter().all(|&w| w > 0.0) {
        model.omegas
    } else {
        [cants[0].omega, cants[1].omega, cants[2].omega]
    }
}

/// On-resonance amplitude transfer A₃/A₁ = |Λ₁Λ₂ / (4m₂m₃ω₂ω₃γ₂γ₃ + Λ₂²)|.
pub fn transduction_ratio(model: &ReducedModel, cants: &[CantileverParams; 3]) -> Result<f64> {
    if !model.is_resonant() {
        return Err(Error::precondition(format!(
            "transduction ratio needs resonant modulation (δ₂ = {:e}, δ₃ = {:e} rad/s); \
             use the time-domain simulator for the detuned case",
            model.delta2, model.delta3
        )));
    }
    let [_, w2, w3] = omega_or_bare(model, cants);
    let (m2, m3) = (cants[1].mass, cants[2].mass);
    let (l1, l2) = (model.lambda1, model.lambda2);
    let den = 4.0 * m2 * m3 * w2 * w3 * model.gammas[1] * model.gammas[2] + l2 * l2;
    if den == 0.0 {
        return Err(Error::Numerical {
            time: 0.0,
            detail: "transduction ratio denominator vanishes".into(),
        });
    }
    Ok((l1 * l2 / den).abs())
}

/// Cantilever 2 with feedback gain G: γ₂ = γ₂₀ − G.
pub fn apply_gain(cant2: &CantileverParams, gain: f64) -> Result<CantileverParams> {
    if !(gain >= 0.0) {
        return Err(Error::domain(format!("gain must be non-negative, got {gain}")));
    }
    Ok(CantileverParams {
        gamma: cant2.gamma - gain,
        ..*cant2
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityClass {
    Stable,
    Unstable,
    Marginal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stability {
    pub class: StabilityClass,
    /// −max Im λ (rad/s); positive when every mode decays.
    pub margin: f64,
}

/// Classifies the model by its slowest-decaying eigenvalue. Margins within
/// 1e-9 of the matrix scale count as marginal.
pub fn stability_check(model: &ReducedModel) -> Stability {
    let lambdas = eigenvalues(model);
    let margin = -lambdas.iter().map(|l| l.im).fold(f64::NEG_INFINITY, f64::max);
    let scale = model.h.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let class = if margin.abs() <= 1e-9 * scale {
        StabilityClass::Marginal
    } else if margin > 0.0 {
        StabilityClass::Stable
    } else {
        StabilityClass::Unstable
    };
    Stability { class, margin }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::constants::hz;
    use approx::assert_relative_eq;

    #[test]
    fn diagonal_when_uncoupled() {
        let m = ReducedModel::from_parts([0.0; 3], 0.0, 0.0, 3.0, -5.0);
        let l = eigenvalues(&m);
        let re: Vec<f64> = l.iter().map(|z| z.re).collect();
        assert_eq!(re, vec![-3.0, 0.0, 5.0]);
    }

    #[test]
    fn lossless_symmetric_splitting() {
        let g = hz(20.0);
        let m = ReducedModel::from_parts([0.0; 3], g, g, 0.0, 0.0);
        let l = eigenvalues(&m);
        assert_relative_eq!(l[0].re, -g / SQRT_2, max_relative = 1e-12);
        assert!(l[1].norm() < 1e-12 * g);
        assert_relative_eq!(l[2].re, g / SQRT_2, max_relative = 1e-12);
        assert_relative_eq!(l[2].re - l[0].re, hz(28.284_271), max_relative = 1e-6);
    }

    #[test]
    fn gain_examples() {
        let c = CantileverParams::from_mass(1e-10, hz(6172.0), hz(6.06), None).unwrap();
        assert_eq!(apply_gain(&c, 0.0).unwrap(), c);
        assert_eq!(apply_gain(&c, hz(6.06)).unwrap().gamma, 0.0);
        assert_relative_eq!(apply_gain(&c, hz(8.73)).unwrap().gamma, -hz(2.67), max_relative = 1e-12);
        assert!(apply_gain(&c, -1.0).is_err());
    }

    #[test]
    fn spring_constant_checked() {
        assert!(CantileverParams::new(1e-10, 1e4, 1.0, 1e-2 * 1.01, None).is_err());
        assert!(CantileverParams::new(1e-10, 1e4, 1.0, 1e-2, None).is_ok());
    }

    #[test]
    fn uncoupled_damped_is_stable() {
        let m = ReducedModel::from_parts([1.0, 2.0, 3.0], 0.0, 0.0, 0.0, 0.0);
        assert_eq!(stability_check(&m).class, StabilityClass::Stable);
        assert_relative_eq!(stability_check(&m).margin, 0.5, max_relative = 1e-12);
    }

    #[test]
    fn eigenvector_satisfies_equation() {
        let m = ReducedModel::from_parts([1.0, -0.5, 1.0], 3.0, 2.0, 0.7, -0.2);
        for (l, v) in eigensystem(&m) {
            let r = m.h * v - v * l;
            assert!(r.norm() < 1e-10);
        }
    }
}
