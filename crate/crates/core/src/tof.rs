//! Two-trap time-of-flight planning. A projectile that kicks both traps is
//! timed to within one trap period, ΔT = 2π/ω, over the baseline L.

use serde::Serialize;

use crate::constants::C;
use crate::error::{Error, Result};
use crate::kinematics::check_speed;
use crate::species::ParticleSpecies;
use crate::trap::TrapConfig;
use crate::units::{Dim, Quantity, Unit};

/// Kinetic energies above this fraction of mc² get a relativity warning.
pub const RELATIVISTIC_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct TofSetup {
    pub trap: TrapConfig,
    baseline: Quantity,
    pub projectile: ParticleSpecies,
}

impl TofSetup {
    pub fn new(trap: TrapConfig, baseline: Quantity, projectile: ParticleSpecies) -> Result<Self> {
        let l = baseline.si_as(Dim::LENGTH)?;
        if !(l > 0.0) {
            return Err(Error::invalid("baseline", format!("must be positive, got {l} m")));
        }
        Ok(Self {
            trap,
            baseline,
            projectile,
        })
    }

    pub fn baseline(&self) -> Quantity {
        self.baseline
    }
}

pub fn timing_resolution(trap: &TrapConfig) -> Quantity {
    trap.period()
}

/// `Δv = v²·ΔT/L`.
pub fn velocity_resolution(setup: &TofSetup, v: Quantity) -> Result<Quantity> {
    check_speed(v)?;
    Ok(v * v * timing_resolution(&setup.trap) / setup.baseline)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Baseline {
    pub length: Quantity,
    /// Set when E > 0.05·mc², where the nonrelativistic formula degrades.
    pub relativistic_warning: bool,
}

fn positive_energy(name: &'static str, e: Quantity) -> Result<f64> {
    let x = e.si_as(Dim::ENERGY)?;
    if !(x > 0.0) {
        return Err(Error::invalid(name, format!("must be positive, got {x} J")));
    }
    Ok(x)
}

fn is_relativistic(e: f64, projectile: &ParticleSpecies) -> bool {
    e > RELATIVISTIC_FRACTION * projectile.mass_kg() * C * C
}

/// `L = (2E)^{3/2}·ΔT / (√m·dE)`.
pub fn required_baseline(e: Quantity, de: Quantity, trap: &TrapConfig, projectile: &ParticleSpecies) -> Result<Baseline> {
    let e_si = positive_energy("energy", e)?;
    let de_si = positive_energy("energy resolution", de)?;
    let dt = timing_resolution(trap).si();
    let l = (2.0 * e_si).powf(1.5) * dt / (projectile.mass_kg().sqrt() * de_si);
    Ok(Baseline {
        length: Quantity::new(l, Unit::M),
        relativistic_warning: is_relativistic(e_si, projectile),
    })
}

/// `dE = m·v·Δv` with the nonrelativistic v(E).
pub fn energy_resolution(setup: &TofSetup, e: Quantity) -> Result<Quantity> {
    let e_si = positive_energy("energy", e)?;
    let m = setup.projectile.mass_kg();
    let v = (2.0 * e_si / m).sqrt();
    let dt = timing_resolution(&setup.trap).si();
    let dv = v * v * dt / setup.baseline.si();
    Ok(Quantity::new(m * v * dv, Unit::J))
}
