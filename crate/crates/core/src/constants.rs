//! Physical constants, CODATA 2018 values in SI units.
//!
//! Everything downstream reads constants from here so that acceptance tests and
//! run manifests refer to a single constant set.

/// Identifier written into run manifests and CSV headers.
pub const CONSTANT_SET: &str = "CODATA-2018";

/// Speed of light in vacuum (m/s, exact).
pub const C: f64 = 299_792_458.0;

/// Reduced Planck constant (J·s).
pub const HBAR: f64 = 1.054_571_817e-34;

/// Elementary charge (C, exact).
pub const E_CHARGE: f64 = 1.602_176_634e-19;

/// Boltzmann constant (J/K, exact).
pub const K_B: f64 = 1.380_649e-23;

/// Fine-structure constant.
pub const ALPHA: f64 = 7.297_352_569_3e-3;

/// Electron mass (kg).
pub const M_ELECTRON: f64 = 9.109_383_701_5e-31;

/// Proton mass (kg).
pub const M_PROTON: f64 = 1.672_621_923_69e-27;

/// Atomic mass constant (kg).
pub const AMU: f64 = 1.660_539_066_60e-27;

/// Relative atomic mass of neutral ⁹Be.
pub const BE9_ATOMIC_MASS_U: f64 = 9.012_183_1;

/// One electronvolt (J).
pub const EV: f64 = E_CHARGE;

/// Seconds per day.
pub const DAY: f64 = 86_400.0;

/// Coulomb coupling α·ħ·c (J·m); the force between charges q₁e and q₂e is
/// `q₁q₂·COULOMB_LAMBDA/r²`.
pub const COULOMB_LAMBDA: f64 = ALPHA * HBAR * C;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coulomb_lambda_matches_e_squared_over_4pi_eps0() {
        let eps0 = 8.854_187_812_8e-12;
        let direct = E_CHARGE * E_CHARGE / (4.0 * std::f64::consts::PI * eps0);
        assert!((COULOMB_LAMBDA / direct - 1.0).abs() < 1e-9);
    }
}
