//! Charged particle species: trapped targets and projectiles.

use serde::{Deserialize, Serialize};

use crate::constants::{AMU, BE9_ATOMIC_MASS_U, M_ELECTRON, M_PROTON};
use crate::error::{Error, Result};
use crate::units::{Dim, Quantity, Unit};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleSpecies {
    label: String,
    mass: Quantity,
    charge_e: f64,
}

impl ParticleSpecies {
    /// `charge_e` is in units of the elementary charge and may be fractional or negative.
    pub fn new(label: impl Into<String>, mass: Quantity, charge_e: f64) -> Result<Self> {
        let m = mass.si_as(Dim::MASS)?;
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::invalid("mass", format!("must be positive, got {m} kg")));
        }
        if !charge_e.is_finite() {
            return Err(Error::invalid("charge", "must be finite"));
        }
        Ok(Self {
            label: label.into(),
            mass,
            charge_e,
        })
    }

    pub fn electron() -> Self {
        Self {
            label: "electron".into(),
            mass: Quantity::new(M_ELECTRON, Unit::KG),
            charge_e: -1.0,
        }
    }

    pub fn proton() -> Self {
        Self {
            label: "proton".into(),
            mass: Quantity::new(M_PROTON, Unit::KG),
            charge_e: 1.0,
        }
    }

    /// Singly ionized ⁹Be (one electron removed from the neutral atom).
    pub fn beryllium9_ion() -> Self {
        Self {
            label: "be9+".into(),
            mass: Quantity::new(BE9_ATOMIC_MASS_U * AMU - M_ELECTRON, Unit::KG),
            charge_e: 1.0,
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn mass(&self) -> Quantity {
        self.mass
    }

    pub fn mass_kg(&self) -> f64 {
        self.mass.si()
    }

    pub fn charge_e(&self) -> f64 {
        self.charge_e
    }

    pub fn with_charge(&self, charge_e: f64) -> Self {
        Self {
            charge_e,
            ..self.clone()
        }
    }
}

/// The built-in species table.
pub fn builtin_species() -> Vec<ParticleSpecies> {
    vec![
        ParticleSpecies::electron(),
        ParticleSpecies::proton(),
        ParticleSpecies::beryllium9_ion(),
    ]
}

/// Look up a built-in species by label (case-insensitive; `be9`, `be` and
/// `9be+` are accepted for the beryllium ion).
pub fn species_by_name(name: &str) -> Result<ParticleSpecies> {
    let key = name.to_ascii_lowercase();
    let key = match key.as_str() {
        "e" | "e-" => "electron",
        "p" | "p+" => "proton",
        "be" | "be9" | "9be+" | "be+" => "be9+",
        other => other,
    };
    builtin_species()
        .into_iter()
        .find(|s| s.label == key)
        .ok_or_else(|| Error::invalid("species", format!("unknown species `{name}`")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn electron_entry() {
        let e = species_by_name("electron").unwrap();
        assert!((e.mass_kg() / 9.109e-31 - 1.0).abs() < 1e-3);
        assert_eq!(e.charge_e(), -1.0);
    }

    #[test]
    fn beryllium_ion_entry() {
        let be = species_by_name("Be9+").unwrap();
        assert!((be.mass_kg() / (9.012 * 1.6605e-27) - 1.0).abs() < 1e-3);
        assert_eq!(be.charge_e(), 1.0);
    }

    #[test]
    fn catalog_contains_required_species() {
        let labels: Vec<_> = builtin_species().iter().map(|s| s.label().to_string()).collect();
        for want in ["electron", "proton", "be9+"] {
            assert!(labels.iter().any(|l| l == want));
        }
    }

    #[test]
    fn custom_species_echoes_fields() {
        let s = ParticleSpecies::new("chi", Quantity::new(1.0, Unit::GEV_MASS), 1e-3).unwrap();
        assert_eq!(s.label(), "chi");
        assert_eq!(s.charge_e(), 1e-3);
        assert!((s.mass().value_in(Unit::GEV_MASS).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nonpositive_or_wrong_dimension_mass_rejected() {
        assert!(ParticleSpecies::new("x", Quantity::new(0.0, Unit::KG), 1.0).is_err());
        assert!(ParticleSpecies::new("x", Quantity::new(1.0, Unit::M), 1.0).is_err());
        assert!(species_by_name("unobtainium").is_err());
    }
}
