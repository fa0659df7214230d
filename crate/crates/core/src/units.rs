//! Dimension-checked quantities.
//!
//! A [`Quantity`] stores its value in SI together with integer exponents over
//! the base dimensions (mass, length, time, charge). Temperature is not a base
//! dimension: it only ever enters as the thermal energy `k_B·T`, which is why
//! the `K` unit below is an energy unit.
//!
//! Multiplication and division compose exponents. Addition and subtraction of
//! mismatched dimensions is a programming error and panics; use
//! [`Quantity::checked_add`] / [`Quantity::checked_sub`] where the operands come
//! from user input.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::{C, DAY, EV, E_CHARGE, HBAR, K_B};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum UnitError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: Dim, right: Dim },
    #[error("square root of a quantity with odd exponents {0}")]
    OddExponent(Dim),
    #[error("unknown unit `{0}`")]
    UnknownUnit(String),
}

/// Exponents over (mass, length, time, charge).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dim {
    pub mass: i8,
    pub length: i8,
    pub time: i8,
    pub charge: i8,
}

impl Dim {
    pub const fn new(mass: i8, length: i8, time: i8, charge: i8) -> Self {
        Self {
            mass,
            length,
            time,
            charge,
        }
    }

    pub const DIMENSIONLESS: Dim = Dim::new(0, 0, 0, 0);
    pub const MASS: Dim = Dim::new(1, 0, 0, 0);
    pub const LENGTH: Dim = Dim::new(0, 1, 0, 0);
    pub const TIME: Dim = Dim::new(0, 0, 1, 0);
    pub const CHARGE: Dim = Dim::new(0, 0, 0, 1);
    pub const AREA: Dim = Dim::new(0, 2, 0, 0);
    pub const VELOCITY: Dim = Dim::new(0, 1, -1, 0);
    pub const INVERSE_SPEED: Dim = Dim::new(0, -1, 1, 0);
    pub const MOMENTUM: Dim = Dim::new(1, 1, -1, 0);
    pub const ENERGY: Dim = Dim::new(1, 2, -2, 0);
    pub const ACTION: Dim = Dim::new(1, 2, -1, 0);
    pub const FREQUENCY: Dim = Dim::new(0, 0, -1, 0);
    pub const NUMBER_DENSITY: Dim = Dim::new(0, -3, 0, 0);
    pub const MASS_DENSITY: Dim = Dim::new(1, -3, 0, 0);
    /// Coulomb coupling λ = α·ħ·c·|q₁q₂| (energy × length).
    pub const COUPLING: Dim = Dim::new(1, 3, -2, 0);
    /// Events per unit time per unit momentum.
    pub const RATE_PER_MOMENTUM: Dim = Dim::new(-1, -1, 0, 0);
    /// Particles per area per time.
    pub const FLUX: Dim = Dim::new(0, -2, -1, 0);

    fn combine(self, other: Dim, sign: i8) -> Dim {
        Dim {
            mass: self.mass + sign * other.mass,
            length: self.length + sign * other.length,
            time: self.time + sign * other.time,
            charge: self.charge + sign * other.charge,
        }
    }

    fn scale(self, k: i8) -> Dim {
        Dim::new(self.mass * k, self.length * k, self.time * k, self.charge * k)
    }

    fn halve(self) -> Option<Dim> {
        let all_even = [self.mass, self.length, self.time, self.charge]
            .iter()
            .all(|e| e % 2 == 0);
        all_even.then(|| Dim::new(self.mass / 2, self.length / 2, self.time / 2, self.charge / 2))
    }

    /// Power of eV this dimension carries once ħ = c = 1 (charge counted in units of e).
    pub fn natural_ev_power(self) -> i32 {
        self.mass as i32 - self.length as i32 - self.time as i32
    }
}

impl fmt::Display for Dim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[M^{} L^{} T^{} Q^{}]",
            self.mass, self.length, self.time, self.charge
        )
    }
}

/// A value with a dimension, stored in SI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantity {
    value: f64,
    dim: Dim,
}

impl Quantity {
    pub const fn new_si(value: f64, dim: Dim) -> Self {
        Self { value, dim }
    }

    pub fn new(value: f64, unit: Unit) -> Self {
        Self {
            value: value * unit.scale,
            dim: unit.dim,
        }
    }

    pub const fn dimensionless(value: f64) -> Self {
        Self::new_si(value, Dim::DIMENSIONLESS)
    }

    pub fn kelvin(temperature: f64) -> Self {
        Self::new_si(temperature * K_B, Dim::ENERGY)
    }

    pub fn si(&self) -> f64 {
        self.value
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    /// SI value, after asserting the dimension.
    pub fn si_as(&self, dim: Dim) -> Result<f64, UnitError> {
        if self.dim == dim {
            Ok(self.value)
        } else {
            Err(UnitError::DimensionMismatch {
                left: self.dim,
                right: dim,
            })
        }
    }

    pub fn checked_add(self, rhs: Quantity) -> Result<Quantity, UnitError> {
        self.same_dim(&rhs)?;
        Ok(Quantity::new_si(self.value + rhs.value, self.dim))
    }

    pub fn checked_sub(self, rhs: Quantity) -> Result<Quantity, UnitError> {
        self.same_dim(&rhs)?;
        Ok(Quantity::new_si(self.value - rhs.value, self.dim))
    }

    pub fn checked_sqrt(self) -> Result<Quantity, UnitError> {
        let dim = self.dim.halve().ok_or(UnitError::OddExponent(self.dim))?;
        Ok(Quantity::new_si(self.value.sqrt(), dim))
    }

    /// Square root; panics when any exponent is odd.
    pub fn sqrt(self) -> Quantity {
        match self.checked_sqrt() {
            Ok(q) => q,
            Err(e) => panic!("{e}"),
        }
    }

    pub fn powi(self, n: i8) -> Quantity {
        Quantity::new_si(self.value.powi(n as i32), self.dim.scale(n))
    }

    pub fn recip(self) -> Quantity {
        Quantity::new_si(1.0 / self.value, self.dim.scale(-1))
    }

    pub fn abs(self) -> Quantity {
        Quantity::new_si(self.value.abs(), self.dim)
    }

    /// Numeric value in `unit`.
    pub fn value_in(&self, unit: Unit) -> Result<f64, UnitError> {
        Ok(self.convert(unit)?.value)
    }

    /// Express this quantity in `unit`.
    pub fn convert(&self, unit: Unit) -> Result<Measured, UnitError> {
        if self.dim != unit.dim {
            return Err(UnitError::DimensionMismatch {
                left: self.dim,
                right: unit.dim,
            });
        }
        Ok(Measured {
            value: self.value / unit.scale,
            unit,
        })
    }

    /// View in natural units (ħ = c = 1, charge in units of e): the value
    /// multiplying eV^[`Dim::natural_ev_power`].
    pub fn to_natural(&self) -> f64 {
        self.value / natural_scale(self.dim)
    }

    pub fn from_natural(value: f64, dim: Dim) -> Quantity {
        Quantity::new_si(value * natural_scale(dim), dim)
    }

    fn same_dim(&self, rhs: &Quantity) -> Result<(), UnitError> {
        if self.dim == rhs.dim {
            Ok(())
        } else {
            Err(UnitError::DimensionMismatch {
                left: self.dim,
                right: rhs.dim,
            })
        }
    }
}

/// SI value of one natural unit of the given dimension.
fn natural_scale(dim: Dim) -> f64 {
    let mass = EV / (C * C);
    let length = HBAR * C / EV;
    let time = HBAR / EV;
    mass.powi(dim.mass as i32)
        * length.powi(dim.length as i32)
        * time.powi(dim.time as i32)
        * E_CHARGE.powi(dim.charge as i32)
}

impl Add for Quantity {
    type Output = Quantity;
    fn add(self, rhs: Quantity) -> Quantity {
        match self.checked_add(rhs) {
            Ok(q) => q,
            Err(e) => panic!("{e}"),
        }
    }
}

impl Sub for Quantity {
    type Output = Quantity;
    fn sub(self, rhs: Quantity) -> Quantity {
        match self.checked_sub(rhs) {
            Ok(q) => q,
            Err(e) => panic!("{e}"),
        }
    }
}

impl Mul for Quantity {
    type Output = Quantity;
    fn mul(self, rhs: Quantity) -> Quantity {
        Quantity::new_si(self.value * rhs.value, self.dim.combine(rhs.dim, 1))
    }
}

impl Div for Quantity {
    type Output = Quantity;
    fn div(self, rhs: Quantity) -> Quantity {
        Quantity::new_si(self.value / rhs.value, self.dim.combine(rhs.dim, -1))
    }
}

impl Mul<f64> for Quantity {
    type Output = Quantity;
    fn mul(self, rhs: f64) -> Quantity {
        Quantity::new_si(self.value * rhs, self.dim)
    }
}

impl Mul<Quantity> for f64 {
    type Output = Quantity;
    fn mul(self, rhs: Quantity) -> Quantity {
        rhs * self
    }
}

impl Div<f64> for Quantity {
    type Output = Quantity;
    fn div(self, rhs: f64) -> Quantity {
        Quantity::new_si(self.value / rhs, self.dim)
    }
}

impl Neg for Quantity {
    type Output = Quantity;
    fn neg(self) -> Quantity {
        Quantity::new_si(-self.value, self.dim)
    }
}

impl PartialOrd for Quantity {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        if self.dim == other.dim {
            self.value.partial_cmp(&other.value)
        } else {
            None
        }
    }
}

/// A named unit: `scale` SI units per one of this unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Unit {
    pub symbol: &'static str,
    pub dim: Dim,
    pub scale: f64,
}

impl Unit {
    const fn new(symbol: &'static str, dim: Dim, scale: f64) -> Self {
        Self { symbol, dim, scale }
    }

    pub const ONE: Unit = Unit::new("1", Dim::DIMENSIONLESS, 1.0);

    pub const KG: Unit = Unit::new("kg", Dim::MASS, 1.0);
    pub const EV_MASS: Unit = Unit::new("eV/c^2", Dim::MASS, EV / (C * C));
    pub const GEV_MASS: Unit = Unit::new("GeV/c^2", Dim::MASS, 1e9 * EV / (C * C));
    pub const AMU: Unit = Unit::new("u", Dim::MASS, crate::constants::AMU);

    pub const M: Unit = Unit::new("m", Dim::LENGTH, 1.0);
    pub const CM: Unit = Unit::new("cm", Dim::LENGTH, 1e-2);
    pub const MM: Unit = Unit::new("mm", Dim::LENGTH, 1e-3);
    pub const UM: Unit = Unit::new("um", Dim::LENGTH, 1e-6);
    pub const NM: Unit = Unit::new("nm", Dim::LENGTH, 1e-9);

    pub const M2: Unit = Unit::new("m^2", Dim::AREA, 1.0);
    pub const CM2: Unit = Unit::new("cm^2", Dim::AREA, 1e-4);
    pub const NM2: Unit = Unit::new("nm^2", Dim::AREA, 1e-18);

    pub const S: Unit = Unit::new("s", Dim::TIME, 1.0);
    pub const NS: Unit = Unit::new("ns", Dim::TIME, 1e-9);
    pub const DAY: Unit = Unit::new("day", Dim::TIME, DAY);

    pub const RAD_PER_S: Unit = Unit::new("rad/s", Dim::FREQUENCY, 1.0);
    pub const PER_S: Unit = Unit::new("1/s", Dim::FREQUENCY, 1.0);
    pub const PER_DAY: Unit = Unit::new("1/day", Dim::FREQUENCY, 1.0 / DAY);
    /// Cyclic frequency read as an angular frequency: 1 Hz = 2π rad/s.
    pub const HZ: Unit = Unit::new("Hz", Dim::FREQUENCY, std::f64::consts::TAU);

    pub const M_PER_S: Unit = Unit::new("m/s", Dim::VELOCITY, 1.0);
    pub const KM_PER_S: Unit = Unit::new("km/s", Dim::VELOCITY, 1e3);
    pub const SPEED_OF_LIGHT: Unit = Unit::new("c", Dim::VELOCITY, C);
    pub const S_PER_M: Unit = Unit::new("s/m", Dim::INVERSE_SPEED, 1.0);

    pub const KG_M_PER_S: Unit = Unit::new("kg m/s", Dim::MOMENTUM, 1.0);
    pub const EV_MOMENTUM: Unit = Unit::new("eV/c", Dim::MOMENTUM, EV / C);
    pub const KEV_MOMENTUM: Unit = Unit::new("keV/c", Dim::MOMENTUM, 1e3 * EV / C);

    pub const J: Unit = Unit::new("J", Dim::ENERGY, 1.0);
    pub const EV: Unit = Unit::new("eV", Dim::ENERGY, EV);
    pub const KEV: Unit = Unit::new("keV", Dim::ENERGY, 1e3 * EV);
    pub const GEV: Unit = Unit::new("GeV", Dim::ENERGY, 1e9 * EV);
    pub const MEV_MILLI: Unit = Unit::new("meV", Dim::ENERGY, 1e-3 * EV);
    pub const UEV: Unit = Unit::new("ueV", Dim::ENERGY, 1e-6 * EV);
    pub const NEV: Unit = Unit::new("neV", Dim::ENERGY, 1e-9 * EV);
    /// Thermal energy k_B·(1 K).
    pub const KELVIN: Unit = Unit::new("K", Dim::ENERGY, K_B);

    pub const J_S: Unit = Unit::new("J s", Dim::ACTION, 1.0);
    pub const EV_S: Unit = Unit::new("eV s", Dim::ACTION, EV);

    pub const COULOMB: Unit = Unit::new("C", Dim::CHARGE, 1.0);
    pub const E: Unit = Unit::new("e", Dim::CHARGE, E_CHARGE);

    pub const PER_M3: Unit = Unit::new("1/m^3", Dim::NUMBER_DENSITY, 1.0);
    pub const PER_CM3: Unit = Unit::new("1/cm^3", Dim::NUMBER_DENSITY, 1e6);
    pub const GEV_PER_CM3: Unit = Unit::new("GeV/c^2/cm^3", Dim::MASS_DENSITY, 1e9 * EV / (C * C) * 1e6);

    pub const PER_CM2_DAY: Unit = Unit::new("1/cm^2/day", Dim::FLUX, 1e4 / DAY);

    pub const CATALOG: &'static [Unit] = &[
        Unit::ONE,
        Unit::KG,
        Unit::EV_MASS,
        Unit::GEV_MASS,
        Unit::AMU,
        Unit::M,
        Unit::CM,
        Unit::MM,
        Unit::UM,
        Unit::NM,
        Unit::M2,
        Unit::CM2,
        Unit::NM2,
        Unit::S,
        Unit::NS,
        Unit::DAY,
        Unit::RAD_PER_S,
        Unit::PER_S,
        Unit::PER_DAY,
        Unit::HZ,
        Unit::M_PER_S,
        Unit::KM_PER_S,
        Unit::SPEED_OF_LIGHT,
        Unit::S_PER_M,
        Unit::KG_M_PER_S,
        Unit::EV_MOMENTUM,
        Unit::KEV_MOMENTUM,
        Unit::J,
        Unit::EV,
        Unit::KEV,
        Unit::GEV,
        Unit::MEV_MILLI,
        Unit::UEV,
        Unit::NEV,
        Unit::KELVIN,
        Unit::J_S,
        Unit::EV_S,
        Unit::COULOMB,
        Unit::E,
        Unit::PER_M3,
        Unit::PER_CM3,
        Unit::GEV_PER_CM3,
        Unit::PER_CM2_DAY,
    ];

    pub fn parse(symbol: &str) -> Result<Unit, UnitError> {
        Unit::CATALOG
            .iter()
            .copied()
            .find(|u| u.symbol == symbol)
            .ok_or_else(|| UnitError::UnknownUnit(symbol.to_string()))
    }
}

/// A number paired with the unit it is expressed in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measured {
    pub value: f64,
    pub unit: Unit,
}

impl Measured {
    pub fn to_quantity(self) -> Quantity {
        Quantity::new(self.value, self.unit)
    }
}

impl fmt::Display for Measured {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6e} {}", self.value, self.unit.symbol)
    }
}
