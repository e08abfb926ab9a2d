//! Dielectric response on the imaginary frequency axis and the half-space
//! Fresnel coefficients that feed the Lifshitz integrand.

use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::constants::{ev_to_rad_per_s, SPEED_OF_LIGHT};
use crate::error::{Error, Result};

/// Permittivity table ε(iξ) sampled at increasing imaginary frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct PermittivityTable {
    points: Vec<(f64, f64)>,
}

impl PermittivityTable {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::config("permittivity table is empty"));
        }
        for (i, &(xi, eps)) in points.iter().enumerate() {
            if !(xi.is_finite() && xi >= 0.0) {
                return Err(Error::config(format!("table row {i}: bad frequency {xi}")));
            }
            if !(eps.is_finite() && eps >= 1.0) {
                return Err(Error::config(format!("table row {i}: permittivity {eps} < 1")));
            }
        }
        for (i, w) in points.windows(2).enumerate() {
            if w[1].0 <= w[0].0 {
                return Err(Error::config(format!(
                    "table rows {i}/{}: frequencies must strictly increase",
                    i + 1
                )));
            }
            if w[1].1 > w[0].1 {
                return Err(Error::config(format!(
                    "table rows {i}/{}: permittivity must be non-increasing in frequency",
                    i + 1
                )));
            }
        }
        Ok(Self { points })
    }

    /// Reads a two-column text file (ξ in rad/s, ε). Lines starting with `#` are skipped.
    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self> {
        let mut points = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|s| !s.is_empty());
            let parse = |s: Option<&str>| -> Result<f64> {
                s.ok_or_else(|| Error::config(format!("line {}: expected two columns", lineno + 1)))?
                    .parse::<f64>()
                    .map_err(|e| Error::config(format!("line {}: {e}", lineno + 1)))
            };
            let xi = parse(cols.next())?;
            let eps = parse(cols.next())?;
            points.push((xi, eps));
        }
        Self::new(points)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref())?;
        Self::from_reader(std::io::BufReader::new(file))
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// Log-log interpolation, clamped to the end values outside the table.
    fn eval(&self, xi: f64) -> f64 {
        let pts = &self.points;
        let (first, last) = (pts[0], pts[pts.len() - 1]);
        if pts.len() == 1 || xi <= first.0 {
            return first.1;
        }
        if xi >= last.0 {
            return last.1;
        }
        let hi = pts.partition_point(|p| p.0 <= xi);
        let (x0, e0) = pts[hi - 1];
        let (x1, e1) = pts[hi];
        if x0 <= 0.0 {
            // log axis undefined at ξ = 0; fall back to linear on the first interval
            let t = (xi - x0) / (x1 - x0);
            return e0 + t * (e1 - e0);
        }
        let t = (xi / x0).ln() / (x1 / x0).ln();
        (e0.ln() + t * (e1 / e0).ln()).exp()
    }
}

impl TryFrom<Vec<(f64, f64)>> for PermittivityTable {
    type Error = Error;
    fn try_from(points: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(points)
    }
}

impl From<PermittivityTable> for Vec<(f64, f64)> {
    fn from(t: PermittivityTable) -> Self {
        t.points
    }
}

/// Dielectric model of the coatings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MaterialModel {
    IdealConductor,
    /// ε(iξ) = 1 + ω_p² / (ξ(ξ + γ_D)), both parameters in rad/s.
    Drude {
        plasma_frequency: f64,
        relaxation_rate: f64,
    },
    /// Dissipationless limit ε(iξ) = 1 + ω_p²/ξ².
    Plasma { plasma_frequency: f64 },
    Tabulated(PermittivityTable),
}

impl Default for MaterialModel {
    fn default() -> Self {
        Self::gold_drude()
    }
}

impl MaterialModel {
    pub fn drude(plasma_frequency: f64, relaxation_rate: f64) -> Result<Self> {
        if !(plasma_frequency > 0.0 && relaxation_rate > 0.0)
            || !plasma_frequency.is_finite()
            || !relaxation_rate.is_finite()
        {
            return Err(Error::config(format!(
                "Drude parameters must be positive (ω_p = {plasma_frequency}, γ_D = {relaxation_rate})"
            )));
        }
        Ok(Self::Drude {
            plasma_frequency,
            relaxation_rate,
        })
    }

    pub fn plasma(plasma_frequency: f64) -> Result<Self> {
        if !(plasma_frequency > 0.0 && plasma_frequency.is_finite()) {
            return Err(Error::config(format!(
                "plasma frequency must be positive, got {plasma_frequency}"
            )));
        }
        Ok(Self::Plasma { plasma_frequency })
    }

    /// Gold with ω_p = 9.0 eV and γ_D = 0.035 eV.
    pub fn gold_drude() -> Self {
        Self::Drude {
            plasma_frequency: ev_to_rad_per_s(9.0),
            relaxation_rate: ev_to_rad_per_s(0.035),
        }
    }

    pub fn gold_plasma() -> Self {
        Self::Plasma {
            plasma_frequency: ev_to_rad_per_s(9.0),
        }
    }

    /// Checks the invariants of a model built by hand or deserialized.
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::IdealConductor | Self::Tabulated(_) => Ok(()),
            Self::Drude {
                plasma_frequency,
                relaxation_rate,
            } => Self::drude(plasma_frequency, relaxation_rate).map(|_| ()),
            Self::Plasma { plasma_frequency } => Self::plasma(plasma_frequency).map(|_| ()),
        }
    }

    /// ε(iξ). Returns `f64::INFINITY` for the ideal conductor and for the
    /// Drude/plasma models at ξ = 0.
    pub fn permittivity_at(&self, xi: f64) -> Result<f64> {
        check_xi(xi)?;
        Ok(match self {
            Self::IdealConductor => f64::INFINITY,
            Self::Tabulated(t) => t.eval(xi),
            _ if xi == 0.0 => f64::INFINITY,
            _ => 1.0 + self.susceptibility_xi2(xi) / (xi * xi),
        })
    }

    /// (ε(iξ) − 1)·ξ², finite at ξ = 0 for the Drude and plasma models.
    fn susceptibility_xi2(&self, xi: f64) -> f64 {
        match *self {
            Self::IdealConductor => f64::INFINITY,
            Self::Drude {
                plasma_frequency,
                relaxation_rate,
            } => plasma_frequency * plasma_frequency * xi / (xi + relaxation_rate),
            Self::Plasma { plasma_frequency } => plasma_frequency * plasma_frequency,
            Self::Tabulated(ref t) => (t.eval(xi) - 1.0) * xi * xi,
        }
    }

    /// Fresnel coefficients (r_TE, r_TM) of a half-space at imaginary
    /// frequency ξ and in-plane wave vector k⊥.
    pub fn reflection_coefficients(&self, xi: f64, k_perp: f64) -> Result<(f64, f64)> {
        check_xi(xi)?;
        if !(k_perp >= 0.0 && k_perp.is_finite()) {
            return Err(Error::domain(format!("k_perp must be non-negative, got {k_perp}")));
        }
        if xi == 0.0 && k_perp == 0.0 {
            return Err(Error::domain("xi and k_perp cannot both be zero"));
        }
        let fresnel = Fresnel::new(self, xi)?;
        let kappa = xi / SPEED_OF_LIGHT;
        let q = (k_perp * k_perp + kappa * kappa).sqrt();
        Ok(fresnel.at_q(q))
    }
}

fn check_xi(xi: f64) -> Result<()> {
    if xi >= 0.0 && !xi.is_nan() {
        Ok(())
    } else {
        Err(Error::domain(format!("imaginary frequency must be non-negative, got {xi}")))
    }
}

/// Reflection coefficients at a fixed Matsubara frequency, parameterised by the
/// vacuum decay constant q = √(k⊥² + ξ²/c²).
#[derive(Debug, Clone, Copy)]
pub(crate) enum Fresnel {
    Perfect,
    /// Half-space with ε(iξ) and (ε − 1)ξ²/c².
    Dielectric { eps: f64, chi_kappa2: f64 },
    /// ξ = 0 with ε → ∞ but finite (ε − 1)ξ² (Drude: 0, plasma: ω_p²).
    StaticMetal { chi_kappa2: f64 },
}

impl Fresnel {
    pub(crate) fn new(material: &MaterialModel, xi: f64) -> Result<Self> {
        check_xi(xi)?;
        Ok(match material {
            MaterialModel::IdealConductor => Fresnel::Perfect,
            MaterialModel::Tabulated(t) => {
                let eps = t.eval(xi);
                let kappa = xi / SPEED_OF_LIGHT;
                Fresnel::Dielectric {
                    eps,
                    chi_kappa2: (eps - 1.0) * kappa * kappa,
                }
            }
            m => {
                let chi_kappa2 = m.susceptibility_xi2(xi) / (SPEED_OF_LIGHT * SPEED_OF_LIGHT);
                if xi == 0.0 {
                    Fresnel::StaticMetal { chi_kappa2 }
                } else {
                    Fresnel::Dielectric {
                        eps: 1.0 + m.susceptibility_xi2(xi) / (xi * xi),
                        chi_kappa2,
                    }
                }
            }
        })
    }

    /// (r_TE, r_TM) at decay constant q.
    #[inline]
    pub(crate) fn at_q(&self, q: f64) -> (f64, f64) {
        match *self {
            Fresnel::Perfect => (-1.0, 1.0),
            Fresnel::StaticMetal { chi_kappa2 } => {
                let k_mat = (q * q + chi_kappa2).sqrt();
                ((q - k_mat) / (q + k_mat), 1.0)
            }
            Fresnel::Dielectric { eps, chi_kappa2 } => {
                let k_mat = (q * q + chi_kappa2).sqrt();
                let r_te = (q - k_mat) / (q + k_mat);
                let r_tm = (eps * q - k_mat) / (eps * q + k_mat);
                (r_te, r_tm)
            }
        }
    }
}

/// Matsubara frequencies ξ_l = 2π k_B T l / ħ with the primed-sum weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatsubaraGrid {
    temperature: f64,
    spacing: f64,
}

impl MatsubaraGrid {
    pub fn new(temperature: f64) -> Result<Self> {
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::domain(format!(
                "Matsubara grid needs a positive temperature, got {temperature}"
            )));
        }
        let spacing = 2.0 * std::f64::consts::PI * super::constants::BOLTZMANN * temperature
            / super::constants::HBAR;
        Ok(Self {
            temperature,
            spacing,
        })
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    #[inline]
    pub fn frequency(&self, l: usize) -> f64 {
        self.spacing * l as f64
    }

    #[inline]
    pub fn weight(&self, l: usize) -> f64 {
        if l == 0 {
            0.5
        } else {
            1.0
        }
    }

    /// First `n` (frequency, weight) pairs.
    pub fn truncated(&self, n: usize) -> Vec<(f64, f64)> {
        (0..n).map(|l| (self.frequency(l), self.weight(l))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn drude_high_frequency_transparency() {
        let m = MaterialModel::gold_drude();
        let eps = m.permittivity_at(1e25).unwrap();
        assert_relative_eq!(eps, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn drude_direct_substitution() {
        let (wp, g, xi) = (1.37e16_f64, 5.32e13_f64, 1.0e15_f64);
        let m = MaterialModel::drude(wp, g).unwrap();
        // hand arithmetic: 1.8769e32 / (1e15 * 1.0532e15) = 178.21...
        let expected = 1.0 + 1.8769e32 / 1.0532e30;
        assert_relative_eq!(m.permittivity_at(xi).unwrap(), expected, max_relative = 1e-12);
    }

    #[test]
    fn tabulated_single_node() {
        let t = PermittivityTable::new(vec![(3.0e14, 5.0)]).unwrap();
        let m = MaterialModel::Tabulated(t);
        assert_eq!(m.permittivity_at(3.0e14).unwrap(), 5.0);
        assert_eq!(m.permittivity_at(1.0).unwrap(), 5.0);
        assert_eq!(m.permittivity_at(1e20).unwrap(), 5.0);
    }

    #[test]
    fn tabulated_loglog_interpolation() {
        let t = PermittivityTable::new(vec![(1e14, 100.0), (1e16, 1.0)]).unwrap();
        let m = MaterialModel::Tabulated(t);
        // midpoint in log ξ is the geometric mean of the endpoint values
        assert_relative_eq!(m.permittivity_at(1e15).unwrap(), 10.0, max_relative = 1e-12);
    }

    #[test]
    fn table_rejects_bad_rows() {
        assert!(PermittivityTable::new(vec![]).is_err());
        assert!(PermittivityTable::new(vec![(1.0, 0.5)]).is_err());
        assert!(PermittivityTable::new(vec![(1.0, 2.0), (2.0, 3.0)]).is_err());
        assert!(PermittivityTable::new(vec![(2.0, 3.0), (1.0, 2.0)]).is_err());
    }

    #[test]
    fn table_file_format() {
        let text = "# xi eps\n1e14 50\n\n1e15, 20\n# trailing\n1e16 2\n";
        let t = PermittivityTable::from_reader(text.as_bytes()).unwrap();
        assert_eq!(t.points().len(), 3);
        assert_eq!(t.points()[1], (1e15, 20.0));
    }

    #[test]
    fn negative_xi_is_domain_error() {
        let m = MaterialModel::gold_drude();
        assert!(matches!(m.permittivity_at(-1.0), Err(Error::Domain(_))));
        assert!(m.reflection_coefficients(-1.0, 1e7).is_err());
        assert!(m.reflection_coefficients(0.0, 0.0).is_err());
    }

    #[test]
    fn drude_rejects_nonpositive() {
        assert!(MaterialModel::drude(0.0, 1.0).is_err());
        assert!(MaterialModel::drude(1.0, -1.0).is_err());
    }

    #[test]
    fn ideal_conductor_is_perfect_mirror() {
        let m = MaterialModel::IdealConductor;
        assert_eq!(m.reflection_coefficients(1e14, 1e7).unwrap(), (-1.0, 1.0));
        assert_eq!(m.reflection_coefficients(0.0, 1e7).unwrap(), (-1.0, 1.0));
        assert!(m.permittivity_at(1e14).unwrap().is_infinite());
    }

    #[test]
    fn vacuum_has_no_interface() {
        let m = MaterialModel::Tabulated(PermittivityTable::new(vec![(1e14, 1.0)]).unwrap());
        let (te, tm) = m.reflection_coefficients(2e14, 3e6).unwrap();
        assert_eq!((te, tm), (0.0, 0.0));
    }

    #[test]
    fn drude_gold_against_scalar_formulas() {
        let m = MaterialModel::gold_drude();
        let xi1 = MatsubaraGrid::new(300.0).unwrap().frequency(1);
        let k = 1e7;
        let (te, tm) = m.reflection_coefficients(xi1, k).unwrap();

        // independent evaluation straight from the textbook formulas
        let wp = 9.0 * 1.602_176_634e-19 / 1.054_571_817e-34;
        let gd = 0.035 * 1.602_176_634e-19 / 1.054_571_817e-34;
        let eps = 1.0 + wp * wp / (xi1 * (xi1 + gd));
        let c = 299_792_458.0;
        let q = (k * k + xi1 * xi1 / (c * c)).sqrt();
        let km = (k * k + eps * xi1 * xi1 / (c * c)).sqrt();
        assert_relative_eq!(te, (q - km) / (q + km), max_relative = 1e-12);
        assert_relative_eq!(tm, (eps * q - km) / (eps * q + km), max_relative = 1e-12);
    }

    #[test]
    fn drude_static_limit() {
        let m = MaterialModel::gold_drude();
        let (te, tm) = m.reflection_coefficients(0.0, 1e7).unwrap();
        assert_eq!(te, 0.0);
        assert_eq!(tm, 1.0);
        let p = MaterialModel::gold_plasma();
        let (te, tm) = p.reflection_coefficients(0.0, 1e5).unwrap();
        assert!(te < -0.99 && te > -1.0);
        assert_eq!(tm, 1.0);
    }

    #[test]
    fn matsubara_spacing_at_room_temperature() {
        let g = MatsubaraGrid::new(300.0).unwrap();
        let expected = 2.0 * std::f64::consts::PI * 1.380_649e-23 * 300.0 / 1.054_571_817e-34;
        assert_relative_eq!(g.spacing(), expected, max_relative = 1e-12);
        assert!((g.spacing() / 2.47e14 - 1.0).abs() < 5e-3);
        assert_eq!(g.frequency(0), 0.0);
        assert_eq!(g.weight(0), 0.5);
        let v = g.truncated(5);
        assert!(v.windows(2).all(|w| w[1].0 > w[0].0));
    }

    proptest! {
        #[test]
        fn coefficients_bounded(log_eps in 0.0f64..8.0, log_xi in 10.0f64..17.0, log_k in 4.0f64..9.0) {
            let eps = 10f64.powf(log_eps);
            let m = MaterialModel::Tabulated(PermittivityTable::new(vec![(1.0, eps)]).unwrap());
            let (te, tm) = m.reflection_coefficients(10f64.powf(log_xi), 10f64.powf(log_k)).unwrap();
            prop_assert!((-1.0..=0.0).contains(&te));
            prop_assert!((0.0..=1.0).contains(&tm));
        }

        #[test]
        fn coefficients_approach_perfect_mirror(log_eps in 0.0f64..6.0, log_xi in 12.0f64..16.0, log_k in 5.0f64..8.0) {
            let eps = 10f64.powf(log_eps);
            let (xi, k) = (10f64.powf(log_xi), 10f64.powf(log_k));
            let lo = MaterialModel::Tabulated(PermittivityTable::new(vec![(1.0, eps)]).unwrap());
            let hi = MaterialModel::Tabulated(PermittivityTable::new(vec![(1.0, eps * 10.0)]).unwrap());
            let (te0, tm0) = lo.reflection_coefficients(xi, k).unwrap();
            let (te1, tm1) = hi.reflection_coefficients(xi, k).unwrap();
            prop_assert!(te1 <= te0 + 1e-15);
            prop_assert!(tm1 >= tm0 - 1e-15);
        }
    }
}
