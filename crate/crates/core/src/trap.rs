//! Trap and monitored-mode description, quantum-limited thresholds, and
//! heating-rate bookkeeping.
//!
//! `omega` is always an angular frequency (rad/s). Callers holding a cyclic
//! frequency go through [`TrapConfig::from_frequency_hz`].

use serde::{Deserialize, Serialize};

use crate::constants::HBAR;
use crate::error::{Error, Result};
use crate::species::ParticleSpecies;
use crate::units::{Dim, Quantity, Unit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrapKind {
    #[default]
    Penning,
    Paul,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrapConfig {
    kind: TrapKind,
    omega: Quantity,
    species: ParticleSpecies,
    electrode_distance: Option<Quantity>,
    heating_rate: Option<Quantity>,
    n_sensors: u64,
}

impl TrapConfig {
    pub fn new(kind: TrapKind, omega: Quantity, species: ParticleSpecies) -> Result<Self> {
        let w = omega.si_as(Dim::FREQUENCY)?;
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::invalid("omega", format!("must be positive, got {w} rad/s")));
        }
        Ok(Self {
            kind,
            omega,
            species,
            electrode_distance: None,
            heating_rate: None,
            n_sensors: 1,
        })
    }

    /// Electron in a Penning trap with angular frequency `omega_rad_s`.
    pub fn electron(omega_rad_s: f64) -> Result<Self> {
        Self::new(
            TrapKind::Penning,
            Quantity::new(omega_rad_s, Unit::RAD_PER_S),
            ParticleSpecies::electron(),
        )
    }

    pub fn from_frequency_hz(kind: TrapKind, freq_hz: f64, species: ParticleSpecies) -> Result<Self> {
        Self::new(kind, Quantity::new(freq_hz, Unit::HZ), species)
    }

    pub fn with_electrode_distance(mut self, d: Quantity) -> Result<Self> {
        let v = d.si_as(Dim::LENGTH)?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::invalid("electrode distance", format!("must be positive, got {v} m")));
        }
        self.electrode_distance = Some(d);
        Ok(self)
    }

    pub fn with_heating_rate(mut self, rate: Quantity) -> Result<Self> {
        let v = rate.si_as(Dim::FREQUENCY)?;
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::invalid("heating rate", format!("must be non-negative, got {v} /s")));
        }
        self.heating_rate = Some(rate);
        Ok(self)
    }

    pub fn with_sensors(mut self, n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n_sensors", "must be at least 1"));
        }
        self.n_sensors = n;
        Ok(self)
    }

    pub fn with_species(mut self, species: ParticleSpecies) -> Self {
        self.species = species;
        self
    }

    pub fn with_omega(mut self, omega: Quantity) -> Result<Self> {
        let fresh = TrapConfig::new(self.kind, omega, self.species.clone())?;
        self.omega = fresh.omega;
        Ok(self)
    }

    pub fn kind(&self) -> TrapKind {
        self.kind
    }
    pub fn omega(&self) -> Quantity {
        self.omega
    }
    pub fn omega_si(&self) -> f64 {
        self.omega.si()
    }
    pub fn species(&self) -> &ParticleSpecies {
        &self.species
    }
    pub fn electrode_distance(&self) -> Option<Quantity> {
        self.electrode_distance
    }
    pub fn heating_rate(&self) -> Option<Quantity> {
        self.heating_rate
    }
    pub fn n_sensors(&self) -> u64 {
        self.n_sensors
    }

    /// Single-shot readout time, one trap period 2π/ω.
    pub fn period(&self) -> Quantity {
        Quantity::dimensionless(std::f64::consts::TAU) / self.omega
    }

    /// Quantum quality factor ω/Γ_Q.
    pub fn quality_factor(&self) -> Result<f64> {
        let gamma = self.positive_heating_rate()?;
        Ok((self.omega / gamma).si_as(Dim::DIMENSIONLESS)?)
    }

    fn positive_heating_rate(&self) -> Result<Quantity> {
        let gamma = self.heating_rate.ok_or(Error::MissingParameter("heating rate"))?;
        if gamma.si() <= 0.0 {
            return Err(Error::invalid("heating rate", "must be positive for a duty-cycle bound"));
        }
        Ok(gamma)
    }
}

/// Quantum-limited threshold of the monitored mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdReport {
    pub dp_sql: Quantity,
    pub energy_threshold: Quantity,
    pub ground_state_size: Quantity,
}

fn hbar() -> Quantity {
    Quantity::new(HBAR, Unit::J_S)
}

/// Standard-quantum-limit momentum `sqrt(2ħmω)`, energy `ħω` and ground-state
/// size `x₀ = sqrt(ħ/(2mω))`.
pub fn sql_threshold(trap: &TrapConfig) -> ThresholdReport {
    let m = trap.species().mass();
    let w = trap.omega();
    let two = Quantity::dimensionless(2.0);
    ThresholdReport {
        dp_sql: (two * hbar() * m * w).sqrt(),
        energy_threshold: hbar() * w,
        ground_state_size: (hbar() / (two * m * w)).sqrt(),
    }
}

/// Energy `Δp²/2m` deposited in a free particle by a kick `dp`.
pub fn energy_deposit(dp: Quantity, species: &ParticleSpecies) -> Result<Quantity> {
    let p = dp.si_as(Dim::MOMENTUM)?;
    if p < 0.0 {
        return Err(Error::invalid("dp", "must be non-negative"));
    }
    Ok(dp * dp / (Quantity::dimensionless(2.0) * species.mass()))
}

/// Longest background-free integration window, `Q/ω = 1/Γ_Q`.
pub fn duty_cycle_max(trap: &TrapConfig) -> Result<Quantity> {
    Ok(trap.positive_heating_rate()?.recip())
}

/// Rescale a measured heating rate to a new electrode distance and trapped
/// species: `Γ' = Γ·(d/d')⁴·(m/m')`.
pub fn scale_heating_rate(reference: &TrapConfig, new_d: Quantity, new_species: &ParticleSpecies) -> Result<Quantity> {
    let d_ref = reference
        .electrode_distance()
        .ok_or(Error::MissingParameter("reference electrode distance"))?;
    let gamma = reference
        .heating_rate()
        .ok_or(Error::MissingParameter("reference heating rate"))?;
    let d_new = new_d.si_as(Dim::LENGTH)?;
    if !(d_new > 0.0) {
        return Err(Error::invalid("electrode distance", format!("must be positive, got {d_new} m")));
    }
    let geometric = (d_ref / new_d).powi(4);
    let mass_ratio = reference.species().mass() / new_species.mass();
    Ok(gamma * geometric * mass_ratio)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn electron_gigahertz_threshold() {
        let r = sql_threshold(&TrapConfig::electron(1e9).unwrap());
        // sqrt(2·1.0546e-34·9.109e-31·1e9) kg·m/s expressed in eV/c
        let si = (2.0 * 1.054_571_817e-34 * 9.109_383_701_5e-31 * 1e9f64).sqrt();
        assert!(rel(r.dp_sql.si(), si) < 1e-14);
        assert!(rel(r.dp_sql.value_in(Unit::EV_MOMENTUM).unwrap(), 0.82) < 5e-3);
        assert!(rel(r.energy_threshold.value_in(Unit::UEV).unwrap(), 0.658) < 1e-3);
    }

    #[test]
    fn threshold_band_nev_to_uev() {
        let lo = sql_threshold(&TrapConfig::electron(1e7).unwrap()).energy_threshold;
        let hi = sql_threshold(&TrapConfig::electron(1e10).unwrap()).energy_threshold;
        assert!(rel(lo.value_in(Unit::NEV).unwrap(), 6.58) < 1e-3);
        assert!(rel(hi.value_in(Unit::UEV).unwrap(), 6.58) < 1e-3);
    }

    #[test]
    fn quadrupling_omega_doubles_dp() {
        let a = sql_threshold(&TrapConfig::electron(3e8).unwrap()).dp_sql;
        let b = sql_threshold(&TrapConfig::electron(12e8).unwrap()).dp_sql;
        assert!(rel(b.si(), 2.0 * a.si()) < 1e-14);
    }

    #[test]
    fn energy_deposit_cases() {
        let trap = TrapConfig::electron(1e9).unwrap();
        let r = sql_threshold(&trap);
        let e = energy_deposit(r.dp_sql, trap.species()).unwrap();
        assert!(rel(e.si(), r.energy_threshold.si()) < 1e-14);
        assert_eq!(energy_deposit(Quantity::new(0.0, Unit::KG_M_PER_S), trap.species()).unwrap().si(), 0.0);
        let kev = energy_deposit(Quantity::new(1.0, Unit::KEV_MOMENTUM), trap.species()).unwrap();
        // (1e3 eV)² / (2 · 510998.95 eV)
        assert!(rel(kev.value_in(Unit::EV).unwrap(), 0.978) < 1e-3);
        assert!(energy_deposit(Quantity::new(-1.0, Unit::KG_M_PER_S), trap.species()).is_err());
    }

    #[test]
    fn duty_cycle_cases() {
        let base = TrapConfig::electron(1e9).unwrap();
        let two_per_day = base.clone().with_heating_rate(Quantity::new(2.0, Unit::PER_DAY)).unwrap();
        assert!(rel(duty_cycle_max(&two_per_day).unwrap().value_in(Unit::DAY).unwrap(), 0.5) < 1e-14);
        let one_per_s = base.clone().with_heating_rate(Quantity::new(1.0, Unit::PER_S)).unwrap();
        assert!(rel(duty_cycle_max(&one_per_s).unwrap().si(), 1.0) < 1e-15);
        let ion_like = TrapConfig::electron(6.28e6)
            .unwrap()
            .with_heating_rate(Quantity::new(3.0, Unit::PER_S))
            .unwrap();
        let q = ion_like.quality_factor().unwrap();
        assert!(rel(q, 2.093e6) < 1e-3 && q > 1e5);
        assert!(matches!(duty_cycle_max(&base), Err(Error::MissingParameter(_))));
    }

    fn ion_reference() -> TrapConfig {
        TrapConfig::new(
            TrapKind::Paul,
            Quantity::new(1.0, Unit::HZ) * 1e6,
            ParticleSpecies::beryllium9_ion(),
        )
        .unwrap()
        .with_electrode_distance(Quantity::new(50.0, Unit::UM))
        .unwrap()
        .with_heating_rate(Quantity::new(3.0, Unit::PER_S))
        .unwrap()
    }

    #[test]
    fn heating_rate_scaling() {
        let r = ion_reference();
        let be = ParticleSpecies::beryllium9_ion();
        let doubled = scale_heating_rate(&r, Quantity::new(100.0, Unit::UM), &be).unwrap();
        assert!(rel(doubled.si(), 3.0 / 16.0) < 1e-14);
        let same = scale_heating_rate(&r, Quantity::new(50.0, Unit::UM), &be).unwrap();
        assert!(rel(same.si(), 3.0) < 1e-14);
        let cm = scale_heating_rate(&r, Quantity::new(1.0, Unit::CM), &be).unwrap();
        assert!(rel(cm.si() / 3.0, 6.25e-10) < 1e-12);
        // few phonons per second → about 0.16 phonons per day at 1 cm
        assert!(cm.value_in(Unit::PER_DAY).unwrap() < 1.0);
        assert!(scale_heating_rate(&r, Quantity::new(0.0, Unit::M), &be).is_err());
        assert!(scale_heating_rate(&r, Quantity::new(-1.0, Unit::M), &be).is_err());
    }

    #[test]
    fn lighter_species_heats_faster() {
        let r = ion_reference();
        let e = scale_heating_rate(&r, Quantity::new(50.0, Unit::UM), &ParticleSpecies::electron()).unwrap();
        assert!(e.si() > 3.0);
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(TrapConfig::electron(0.0).is_err());
        assert!(TrapConfig::electron(-1.0).is_err());
        let t = TrapConfig::electron(1.0).unwrap();
        assert!(t.clone().with_sensors(0).is_err());
        assert!(t.clone().with_heating_rate(Quantity::new(-1.0, Unit::PER_S)).is_err());
        assert!(TrapConfig::new(TrapKind::Paul, Quantity::new(1.0, Unit::M), ParticleSpecies::electron()).is_err());
    }

    #[test]
    fn hz_entry_multiplies_by_two_pi() {
        let t = TrapConfig::from_frequency_hz(TrapKind::Paul, 1e8, ParticleSpecies::electron()).unwrap();
        assert!(rel(t.omega_si(), std::f64::consts::TAU * 1e8) < 1e-15);
        assert!(rel(t.period().si(), 1e-8) < 1e-14);
    }

    proptest! {
        #[test]
        fn dp_times_x0_is_hbar(w in 1e3f64..1e12, which in 0usize..3) {
            let sp = crate::species::builtin_species()[which].clone();
            let t = TrapConfig::new(TrapKind::Paul, Quantity::new(w, Unit::RAD_PER_S), sp).unwrap();
            let r = sql_threshold(&t);
            let prod = r.dp_sql * r.ground_state_size;
            prop_assert_eq!(prod.dim(), Dim::ACTION);
            prop_assert!(rel(prod.si(), HBAR) < 1e-12);
            let e = energy_deposit(r.dp_sql, t.species()).unwrap();
            prop_assert!(rel(e.si(), r.energy_threshold.si()) < 1e-12);
        }

        #[test]
        fn heating_scaling_is_multiplicative(a in 0.1f64..10.0, b in 0.1f64..10.0) {
            let r = ion_reference();
            let be = ParticleSpecies::beryllium9_ion();
            let d0 = r.electrode_distance().unwrap();
            let once = scale_heating_rate(&r, d0 * a, &be).unwrap();
            let mid = r.clone().with_electrode_distance(d0 * a).unwrap().with_heating_rate(once).unwrap();
            let twice = scale_heating_rate(&mid, d0 * a * b, &be).unwrap();
            let direct = scale_heating_rate(&r, d0 * (a * b), &be).unwrap();
            prop_assert!(rel(twice.si(), direct.si()) < 1e-12);
        }
    }
}
