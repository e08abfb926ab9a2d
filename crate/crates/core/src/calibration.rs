//! Dynamic force measurement: frequency-shift to gradient conversion,
//! electrostatic separation calibration and gradient integration.
//!
//! Gradients here are derivatives of the force on the sphere along the
//! separation axis, so an attractive force that weakens with distance has a
//! positive gradient and softens the cantilever (negative frequency shift).
//! A [`CasimirTable`] gradient, which is the derivative of the attraction
//! magnitude, enters with the opposite sign; see [`casimir_gradient_from_table`].

use std::f64::consts::PI;
use std::io::Read;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::casimir::CasimirTable;
use crate::error::{Error, Result};
use crate::physics::constants::VACUUM_PERMITTIVITY;

/// Largest |δω/ω| for which the linearized shift formula is accepted.
pub const MAX_RELATIVE_SHIFT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElectrostaticSetup {
    /// Applied voltage (V).
    pub v_ext: f64,
    /// Contact (patch) potential (V).
    pub v_c: f64,
    /// RMS voltage fluctuation (V).
    pub v_rms: f64,
    /// Sphere radius (m).
    pub radius: f64,
    /// True separation (m).
    pub separation: f64,
}

impl ElectrostaticSetup {
    pub fn validate(&self) -> Result<()> {
        if !(self.separation > 0.0) || !(self.radius > 0.0) || !(self.v_rms >= 0.0) {
            return Err(Error::domain(format!(
                "electrostatic setup needs x > 0, R > 0, V_rms ≥ 0, got {self:?}"
            )));
        }
        Ok(())
    }

    /// Sphere–plate electrostatic gradient πε₀R/x² · [(V − V_c)² + V_rms²] (N/m).
    pub fn gradient(&self) -> f64 {
        let dv = self.v_ext - self.v_c;
        PI * VACUUM_PERMITTIVITY * self.radius / (self.separation * self.separation)
            * (dv * dv + self.v_rms * self.v_rms)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyShiftRecord {
    pub v_ext: f64,
    /// Measured shift δω (rad/s).
    pub delta_omega: f64,
    /// Unperturbed angular frequency ω (rad/s).
    pub omega_0: f64,
    /// Spring constant k (N/m).
    pub k_spring: f64,
}

/// dF/dx = −2k δω/ω (N/m).
pub fn gradient_from_shift(record: &FrequencyShiftRecord) -> Result<f64> {
    if !(record.omega_0 > 0.0) || !(record.k_spring > 0.0) {
        return Err(Error::domain("omega_0 and k_spring must be positive"));
    }
    let ratio = record.delta_omega / record.omega_0;
    if ratio.abs() >= MAX_RELATIVE_SHIFT {
        return Err(Error::precondition(format!(
            "|δω/ω| = {:.3} is outside the linearized regime (< {MAX_RELATIVE_SHIFT})",
            ratio.abs()
        )));
    }
    Ok(-2.0 * record.k_spring * ratio)
}

/// Frequency shift from the electrostatic and Casimir gradients:
/// Δω = −(ω/2k)(πε₀R/x²)[(V − V_c)² + V_rms²] − (ω/2k) dF_C/dx.
pub fn predicted_shift(setup: &ElectrostaticSetup, casimir_gradient: f64, omega_0: f64, k_spring: f64) -> Result<f64> {
    setup.validate()?;
    if !(omega_0 > 0.0) || !(k_spring > 0.0) {
        return Err(Error::domain("omega_0 and k_spring must be positive"));
    }
    let s = omega_0 / (2.0 * k_spring);
    Ok(-s * setup.gradient() - s * casimir_gradient)
}

/// Casimir gradient in the calibration sign convention, taken from a table.
pub fn casimir_gradient_from_table(table: &CasimirTable, x: f64) -> Result<f64> {
    table.derivatives(x).map(|(g, _)| -g)
}

/// Shift records for a voltage sweep at fixed separation.
pub fn synthetic_sweep(
    setup: &ElectrostaticSetup,
    voltages: &[f64],
    casimir_gradient: f64,
    omega_0: f64,
    k_spring: f64,
) -> Result<Vec<FrequencyShiftRecord>> {
    voltages
        .iter()
        .map(|&v_ext| {
            let s = ElectrostaticSetup { v_ext, ..*setup };
            Ok(FrequencyShiftRecord {
                v_ext,
                delta_omega: predicted_shift(&s, casimir_gradient, omega_0, k_spring)?,
                omega_0,
                k_spring,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFit {
    #[serde(rename = "x_m")]
    pub separation: f64,
    #[serde(rename = "V_c_V")]
    pub contact_potential: f64,
    #[serde(rename = "gradient_N_per_m")]
    pub casimir_gradient: f64,
    /// RMS of the fit residuals (rad/s).
    pub residual: f64,
}

/// Fits δω(V) = β₂V² + β₁V + β₀ and recovers x from the curvature, V_c from the
/// vertex and the Casimir gradient from the vertex height (V_rms taken as zero).
pub fn calibrate_separation(records: &[FrequencyShiftRecord], radius: f64) -> Result<CalibrationFit> {
    if !(radius > 0.0) {
        return Err(Error::domain(format!("sphere radius must be positive, got {radius}")));
    }
    let first = records
        .first()
        .ok_or_else(|| Error::Fit("no frequency-shift records".into()))?;
    let (omega_0, k_spring) = (first.omega_0, first.k_spring);
    if records.iter().any(|r| r.omega_0 != omega_0 || r.k_spring != k_spring) {
        return Err(Error::InconsistentData(
            "records must share one omega_0 and k_spring".into(),
        ));
    }
    let mut distinct: Vec<f64> = records.iter().map(|r| r.v_ext).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::Fit(format!(
            "degenerate voltage design: {} distinct value(s)",
            distinct.len()
        )));
    }
    if distinct.len() < 5 {
        return Err(Error::precondition(format!(
            "need at least 5 distinct voltages, got {}",
            distinct.len()
        )));
    }

    // centre and scale the voltages so the normal matrix stays well conditioned
    let n = records.len();
    let mean = records.iter().map(|r| r.v_ext).sum::<f64>() / n as f64;
    let span = distinct[distinct.len() - 1] - distinct[0];
    let design = DMatrix::from_fn(n, 3, |i, j| {
        let t = (records[i].v_ext - mean) / span;
        t.powi(2 - j as i32)
    });
    let rhs = DVector::from_iterator(n, records.iter().map(|r| r.delta_omega));
    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if svd.singular_values.min() <= 1e-12 * smax {
        return Err(Error::Fit("design matrix is rank deficient".into()));
    }
    let c = svd
        .solve(&rhs, 0.0)
        .map_err(|e| Error::Fit(format!("least-squares solve failed: {e}")))?;
    let residual = ((&design * &c - &rhs).norm_squared() / n as f64).sqrt();

    // undo the scaling: δω = c0 t² + c1 t + c2 with t = (V − mean)/span
    let a = c[0] / (span * span);
    let t_vertex = -c[1] / (2.0 * c[0]);
    let v_c = mean + t_vertex * span;
    let vertex = c[2] - c[1] * c[1] / (4.0 * c[0]);

    let s = omega_0 / (2.0 * k_spring);
    let x2 = -s * PI * VACUUM_PERMITTIVITY * radius / a;
    if !(x2 > 0.0) || !x2.is_finite() {
        return Err(Error::InconsistentData(format!(
            "fitted curvature {a:e} implies a negative squared separation"
        )));
    }
    if !(v_c > distinct[0] && v_c < distinct[distinct.len() - 1]) {
        return Err(Error::precondition(format!(
            "voltages [{}, {}] V do not bracket the fitted contact potential {v_c} V",
            distinct[0],
            distinct[distinct.len() - 1]
        )));
    }
    Ok(CalibrationFit {
        separation: x2.sqrt(),
        contact_potential: v_c,
        casimir_gradient: -vertex / s,
        residual,
    })
}

#[derive(Debug, Deserialize)]
struct RecordRow {
    #[serde(rename = "V_ext_V")]
    v_ext: f64,
    #[serde(rename = "delta_omega_rad_s")]
    delta_omega: f64,
}

/// Reads `V_ext_V, delta_omega_rad_s` rows for a cantilever with known ω and k.
pub fn read_records<R: Read>(reader: R, omega_0: f64, k_spring: f64) -> Result<Vec<FrequencyShiftRecord>> {
    let mut r = csv::Reader::from_reader(reader);
    r.deserialize::<RecordRow>()
        .map(|row| {
            let row = row?;
            Ok(FrequencyShiftRecord {
                v_ext: row.v_ext,
                delta_omega: row.delta_omega,
                omega_0,
                k_spring,
            })
        })
        .collect()
}

/// Cumulative trapezoidal integral of gradients from the far end inward,
/// with the force at the largest separation fixed to `anchor` (N).
pub fn integrate_gradient(separations: &[f64], gradients: &[f64], anchor: f64) -> Result<Vec<f64>> {
    if separations.len() != gradients.len() {
        return Err(Error::Length(format!(
            "{} separations but {} gradients",
            separations.len(),
            gradients.len()
        )));
    }
    if separations.len() < 3 {
        return Err(Error::domain("gradient integration needs at least 3 points"));
    }
    if separations.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::domain("separations must be strictly increasing"));
    }
    let n = separations.len();
    let mut force = vec![0.0; n];
    force[n - 1] = anchor;
    for i in (0..n - 1).rev() {
        let h = separations[i + 1] - separations[i];
        force[i] = force[i + 1] - 0.5 * h * (gradients[i] + gradients[i + 1]);
    }
    Ok(force)
}

/// [`integrate_gradient`] anchored to a model table at the largest separation.
pub fn integrate_gradient_anchored(separations: &[f64], gradients: &[f64], model: &CasimirTable) -> Result<Vec<f64>> {
    let far = *separations
        .last()
        .ok_or_else(|| Error::domain("gradient integration needs at least 3 points"))?;
    integrate_gradient(separations, gradients, model.force(far)?)
}
