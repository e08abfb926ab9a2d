//! CODATA 2018 physical constants.

/// Reduced Planck constant ħ (J·s).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Speed of light in vacuum (m/s), exact.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Boltzmann constant (J/K), exact.
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Vacuum permittivity ε₀ (F/m).
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;
/// Elementary charge (C), exact. Used to convert eV to rad/s.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;

/// Snapshot of the constants used throughout the crate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    pub hbar: f64,
    pub c: f64,
    pub k_b: f64,
    pub epsilon_0: f64,
}

impl PhysicalConstants {
    pub const CODATA_2018: PhysicalConstants = PhysicalConstants {
        hbar: HBAR,
        c: SPEED_OF_LIGHT,
        k_b: BOLTZMANN,
        epsilon_0: VACUUM_PERMITTIVITY,
    };
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::CODATA_2018
    }
}

/// Angular frequency (rad/s) of a photon energy given in eV.
#[inline]
pub fn ev_to_rad_per_s(ev: f64) -> f64 {
    ev * ELEMENTARY_CHARGE / HBAR
}

/// Converts a linear frequency in Hz to rad/s.
#[inline]
pub fn hz(f: f64) -> f64 {
    2.0 * std::f64::consts::PI * f
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_positive() {
        let k = PhysicalConstants::default();
        for v in [k.hbar, k.c, k.k_b, k.epsilon_0] {
            assert!(v > 0.0);
        }
    }

    #[test]
    fn gold_plasma_frequency_in_rad_per_s() {
        // 9 eV is the usual gold plasma energy, about 1.37e16 rad/s.
        let wp = ev_to_rad_per_s(9.0);
        assert!((wp / 1.367e16 - 1.0).abs() < 1e-3);
    }
}
