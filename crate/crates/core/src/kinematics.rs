//! Single fly-by Coulomb kinematics in the straight-line, small-angle limit.
//!
//! Two impulse conventions are carried side by side. [`ImpulseConvention::PaperEq2`]
//! is `λ/(bv)` and is the default everywhere so the reference numbers
//! reproduce; [`ImpulseConvention::ExactTransverse`] is the full transverse
//! time integral `2λ/(bv)`, which is what the trajectory integration measures.
//! Here λ = α·ħ·c·|q₁q₂|.

use serde::{Deserialize, Serialize};

use crate::constants::{C, COULOMB_LAMBDA};
use crate::error::{Error, Result};
use crate::species::ParticleSpecies;
use crate::trap::{sql_threshold, TrapConfig};
use crate::units::{Dim, Quantity, Unit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ImpulseConvention {
    #[default]
    #[serde(rename = "paper")]
    PaperEq2,
    #[serde(rename = "exact")]
    ExactTransverse,
}

impl ImpulseConvention {
    pub fn factor(self) -> f64 {
        match self {
            ImpulseConvention::PaperEq2 => 1.0,
            ImpulseConvention::ExactTransverse => 2.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ImpulseConvention::PaperEq2 => "paper",
            ImpulseConvention::ExactTransverse => "exact",
        }
    }
}

/// Rule for the smallest projectile speed able to deliver a kick `Δp`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum KinematicMode {
    /// `Δp/m_target`.
    #[default]
    #[serde(rename = "paper")]
    PaperLinear,
    /// `Δp/(2µ)`, the elastic two-body maximum transfer.
    #[serde(rename = "reduced-mass")]
    ReducedMass,
}

impl KinematicMode {
    pub fn name(self) -> &'static str {
        match self {
            KinematicMode::PaperLinear => "paper",
            KinematicMode::ReducedMass => "reduced-mass",
        }
    }

    /// Largest kick (kg·m/s) a projectile at speed `v` can deliver; the
    /// inverse of [`v_min`].
    pub fn max_transfer_si(self, v: f64, target_kg: f64, projectile_kg: f64) -> f64 {
        match self {
            KinematicMode::PaperLinear => target_kg * v,
            KinematicMode::ReducedMass => 2.0 * reduced_mass(target_kg, projectile_kg) * v,
        }
    }

    pub fn v_min_si(self, dp: f64, target_kg: f64, projectile_kg: f64) -> f64 {
        match self {
            KinematicMode::PaperLinear => dp / target_kg,
            KinematicMode::ReducedMass => dp / (2.0 * reduced_mass(target_kg, projectile_kg)),
        }
    }
}

fn reduced_mass(a: f64, b: f64) -> f64 {
    a * b / (a + b)
}

/// Coulomb coupling λ between two species (J·m).
pub fn coupling(a: &ParticleSpecies, b: &ParticleSpecies) -> Quantity {
    Quantity::new_si(COULOMB_LAMBDA * (a.charge_e() * b.charge_e()).abs(), Dim::COUPLING)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlybyEvent {
    b: Quantity,
    v: Quantity,
    pub projectile: ParticleSpecies,
    pub target: ParticleSpecies,
}

impl FlybyEvent {
    pub fn new(b: Quantity, v: Quantity, projectile: ParticleSpecies, target: ParticleSpecies) -> Result<Self> {
        let bb = b.si_as(Dim::LENGTH)?;
        if !(bb > 0.0 && bb.is_finite()) {
            return Err(Error::invalid("impact parameter", format!("must be positive, got {bb} m")));
        }
        check_speed(v)?;
        Ok(Self {
            b,
            v,
            projectile,
            target,
        })
    }

    pub fn impact_parameter(&self) -> Quantity {
        self.b
    }

    pub fn speed(&self) -> Quantity {
        self.v
    }
}

pub(crate) fn check_speed(v: Quantity) -> Result<f64> {
    let s = v.si_as(Dim::VELOCITY)?;
    if !(s > 0.0 && s < C) {
        return Err(Error::invalid("speed", format!("must lie in (0, c), got {s} m/s")));
    }
    Ok(s)
}

/// Like [`check_speed`] but admits the ultrarelativistic limit v = c.
pub(crate) fn check_speed_up_to_c(v: Quantity) -> Result<f64> {
    let s = v.si_as(Dim::VELOCITY)?;
    if !(s > 0.0 && s <= C) {
        return Err(Error::invalid("speed", format!("must lie in (0, c], got {s} m/s")));
    }
    Ok(s)
}

pub fn impulse(e: &FlybyEvent, conv: ImpulseConvention) -> Quantity {
    coupling(&e.projectile, &e.target) / (e.b * e.v) * conv.factor()
}

pub fn flyby_time(e: &FlybyEvent) -> Quantity {
    e.b / e.v
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpulsiveCheck {
    pub ok: bool,
    /// ω·τ
    pub margin: f64,
}

/// Impulsive (free-particle) regime: ω·τ below 0.1.
pub const IMPULSIVE_LIMIT: f64 = 0.1;

pub fn impulsive_ok(e: &FlybyEvent, trap: &TrapConfig) -> ImpulsiveCheck {
    let margin = (trap.omega() * flyby_time(e)).si();
    ImpulsiveCheck {
        ok: margin < IMPULSIVE_LIMIT,
        margin,
    }
}

/// Area `4π·b_th²` inside which a projectile of charge `q_chi` at speed `v`
/// kicks the trapped particle above the quantum-limited threshold. The
/// impulse formula holds up to v = c, so the limit itself is accepted.
pub fn effective_cross_section(trap: &TrapConfig, q_chi: f64, v: Quantity, conv: ImpulseConvention) -> Result<Quantity> {
    check_speed_up_to_c(v)?;
    let dp_th = sql_threshold(trap).dp_sql;
    let lambda = Quantity::new_si(COULOMB_LAMBDA * (q_chi * trap.species().charge_e()).abs(), Dim::COUPLING);
    let b_th = lambda * conv.factor() / (v * dp_th);
    Ok(Quantity::dimensionless(4.0 * std::f64::consts::PI) * b_th * b_th)
}

/// Single-axis acceptance `sqrt(1 − dp_th²/dp²)`, zero at or below threshold.
pub fn acceptance(dp: Quantity, dp_th: Quantity) -> Result<f64> {
    let p = dp.si_as(Dim::MOMENTUM)?;
    let th = dp_th.si_as(Dim::MOMENTUM)?;
    if th < 0.0 {
        return Err(Error::invalid("dp_th", "must be non-negative"));
    }
    Ok(acceptance_si(p, th))
}

pub(crate) fn acceptance_si(p: f64, th: f64) -> f64 {
    if p <= th {
        0.0
    } else {
        let r = th / p;
        (1.0 - r * r).sqrt()
    }
}

pub fn v_min(dp: Quantity, target: &ParticleSpecies, mode: KinematicMode, projectile: &ParticleSpecies) -> Result<Quantity> {
    let p = dp.si_as(Dim::MOMENTUM)?;
    if p < 0.0 {
        return Err(Error::invalid("dp", "must be non-negative"));
    }
    Ok(Quantity::new(
        mode.v_min_si(p, target.mass_kg(), projectile.mass_kg()),
        Unit::M_PER_S,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::{ALPHA, HBAR};
    use crate::quad::{integrate_to_infinity, QuadOptions};
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    fn unit_charge_projectile() -> ParticleSpecies {
        ParticleSpecies::proton()
    }

    fn event(b: f64, v: f64) -> FlybyEvent {
        FlybyEvent::new(
            Quantity::new(b, Unit::M),
            Quantity::new(v, Unit::M_PER_S),
            unit_charge_projectile(),
            ParticleSpecies::electron(),
        )
        .unwrap()
    }

    #[test]
    fn paper_impulse_value() {
        let e = event(100e-9, 1e-3 * C);
        let dp = impulse(&e, ImpulseConvention::PaperEq2);
        let direct = ALPHA * HBAR * C / (100e-9 * 1e-3 * C);
        assert!(rel(dp.si(), direct) < 1e-14);
        assert!(rel(dp.si(), 7.7e-27) < 5e-3);
        assert!(rel(dp.value_in(Unit::EV_MOMENTUM).unwrap(), 14.4) < 5e-3);
    }

    #[test]
    fn doubling_b_halves_impulse() {
        let a = impulse(&event(1e-7, 1e5), ImpulseConvention::PaperEq2);
        let b = impulse(&event(2e-7, 1e5), ImpulseConvention::PaperEq2);
        assert!(rel(a.si(), 2.0 * b.si()) < 1e-15);
    }

    #[test]
    fn exact_transverse_matches_time_integral() {
        // ∫ λ b / (b² + v² t²)^{3/2} dt over the whole line, by quadrature
        let (b, v) = (100e-9, 1e-3 * C);
        let lam = COULOMB_LAMBDA;
        let half = integrate_to_infinity(|t| lam * b / (b * b + v * v * t * t).powf(1.5), 0.0, QuadOptions::rel(1e-12))
            .unwrap()
            .value;
        let e = event(b, v);
        let exact = impulse(&e, ImpulseConvention::ExactTransverse);
        assert!(rel(exact.si(), 2.0 * half) < 1e-9);
        assert_eq!(exact.si(), 2.0 * impulse(&e, ImpulseConvention::PaperEq2).si());
    }

    #[test]
    fn flyby_time_and_regime() {
        let e = event(1e-6, 1e5);
        assert!(rel(flyby_time(&e).si(), 1e-11) < 1e-15);
        let slow = impulsive_ok(&e, &TrapConfig::electron(1e9).unwrap());
        assert!(slow.ok && rel(slow.margin, 0.01) < 1e-12);
        let fast = impulsive_ok(&e, &TrapConfig::electron(1e12).unwrap());
        assert!(!fast.ok && rel(fast.margin, 10.0) < 1e-12);
    }

    #[test]
    fn cross_section_reference_value() {
        let trap = TrapConfig::electron(1e9).unwrap();
        let s = effective_cross_section(&trap, 1.0, Quantity::new(1.0, Unit::SPEED_OF_LIGHT), ImpulseConvention::PaperEq2).unwrap();
        let nm2 = s.value_in(Unit::NM2).unwrap();
        assert!(rel(nm2, 38.8) < 5e-3, "{nm2}");
        assert!(rel(nm2, 40.0) < 0.05);
    }

    #[test]
    fn cross_section_scalings() {
        let v = Quantity::new(1e6, Unit::M_PER_S);
        let conv = ImpulseConvention::PaperEq2;
        let a = effective_cross_section(&TrapConfig::electron(1e9).unwrap(), 1.0, v, conv).unwrap();
        let b = effective_cross_section(&TrapConfig::electron(2e9).unwrap(), 1.0, v, conv).unwrap();
        assert!(rel(a.si(), 2.0 * b.si()) < 1e-14);
        let c = effective_cross_section(&TrapConfig::electron(1e9).unwrap(), 1e-2, v, conv).unwrap();
        assert!(rel(c.si(), 1e-4 * a.si()) < 1e-14);
        assert!(effective_cross_section(&TrapConfig::electron(1e9).unwrap(), 1.0, Quantity::new(1.01 * C, Unit::M_PER_S), conv).is_err());
        assert!(effective_cross_section(&TrapConfig::electron(1e9).unwrap(), 1.0, Quantity::new(0.0, Unit::M_PER_S), conv).is_err());
    }

    #[test]
    fn acceptance_edges() {
        let th = Quantity::new(1.0, Unit::EV_MOMENTUM);
        assert_eq!(acceptance(th, th).unwrap(), 0.0);
        assert_eq!(acceptance(th * 0.5, th).unwrap(), 0.0);
        assert!(rel(acceptance(th * 2.0, th).unwrap(), 3f64.sqrt() / 2.0) < 1e-15);
        assert!(acceptance(th * 1e9, th).unwrap() > 1.0 - 1e-15);
        assert!(acceptance(th, -th).is_err());
    }

    #[test]
    fn v_min_cases() {
        let e = ParticleSpecies::electron();
        let heavy = ParticleSpecies::new("heavy", Quantity::new(1e6, Unit::GEV_MASS), 1.0).unwrap();
        let zero = Quantity::new(0.0, Unit::KG_M_PER_S);
        assert_eq!(v_min(zero, &e, KinematicMode::PaperLinear, &heavy).unwrap().si(), 0.0);
        let dp = Quantity::new(0.510_998_95, Unit::KEV_MOMENTUM);
        let v = v_min(dp, &e, KinematicMode::PaperLinear, &heavy).unwrap();
        assert!(rel(v.value_in(Unit::SPEED_OF_LIGHT).unwrap(), 1e-3) < 1e-8);
        let vr = v_min(dp, &e, KinematicMode::ReducedMass, &heavy).unwrap();
        assert!(rel(vr.si(), 0.5 * v.si()) < 1e-8);
    }

    proptest! {
        #[test]
        fn impulse_homothety(b in 1e-9f64..1e-3, v in 1e2f64..1e7, k in 0.1f64..10.0) {
            prop_assume!(k * v < C);
            let base = impulse(&event(b, v), ImpulseConvention::PaperEq2).si();
            let scaled = impulse(&event(k * b, k * v), ImpulseConvention::PaperEq2).si();
            prop_assert!(rel(scaled, base / (k * k)) < 1e-12);
            let exact = impulse(&event(b, v), ImpulseConvention::ExactTransverse).si();
            prop_assert_eq!(exact / base, 2.0);
        }

        #[test]
        fn cross_section_closed_form(w in 1e5f64..1e11, q in 1e-6f64..1.0, beta in 1e-5f64..0.99) {
            let trap = TrapConfig::electron(w).unwrap();
            let v = Quantity::new(beta, Unit::SPEED_OF_LIGHT);
            let s = effective_cross_section(&trap, q, v, ImpulseConvention::PaperEq2).unwrap();
            let x0 = sql_threshold(&trap).ground_state_size.si();
            let closed = 4.0 * std::f64::consts::PI * x0 * x0 * (ALPHA * q).powi(2) / (beta * beta);
            prop_assert!(rel(s.si(), closed) < 1e-10);
            let exact = effective_cross_section(&trap, q, v, ImpulseConvention::ExactTransverse).unwrap();
            prop_assert!(rel(exact.si(), 4.0 * s.si()) < 1e-12);
        }

        #[test]
        fn acceptance_monotone_bounded(a in 0.0f64..10.0, b in 0.0f64..10.0, th in 0.0f64..5.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let fa = acceptance_si(lo, th);
            let fb = acceptance_si(hi, th);
            prop_assert!((0.0..=1.0).contains(&fa) && (0.0..=1.0).contains(&fb));
            prop_assert!(fa <= fb);
        }
    }
}
