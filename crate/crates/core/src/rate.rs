//! Millicharged dark-matter number density and Rutherford event rates
//! above the quantum-limited threshold.
//!
//! ```text
//! dR/dΔp = n_χ · 2π λ² / Δp³ · η(v_min(Δp))
//! ```
//!
//! Rates are carried in log space as well, since thermal tails push
//! `η(v_min)` far below the smallest positive f64.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::constants::COULOMB_LAMBDA;
use crate::error::{Error, Result};
use crate::kinematics::{ImpulseConvention, KinematicMode};
use crate::quad::{integrate, QuadOptions};
use crate::species::ParticleSpecies;
use crate::trap::{sql_threshold, TrapConfig};
use crate::units::{Dim, Quantity, Unit};
use crate::velocity::VelocityDistribution;

pub const DEFAULT_F_Q: f64 = 4e-3;
pub const DEFAULT_RHO_DM_GEV_CM3: f64 = 0.3;

/// Relative tolerance of the rate quadrature.
pub const RATE_REL_TOL: f64 = 1e-6;

/// An open-ended tail is dropped once a further decade in Δp adds less than
/// this fraction of the running integral.
pub const TAIL_CUTOFF: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdmModel {
    m_chi: Quantity,
    q_chi: f64,
    f_q: f64,
    rho_dm: Quantity,
    dist: VelocityDistribution,
}

impl MdmModel {
    /// Defaults: f_q = 4e-3, ρ = 0.3 GeV/cm³. A thermal distribution is
    /// re-parameterized to `m_chi`.
    pub fn new(m_chi: Quantity, q_chi: f64, dist: VelocityDistribution) -> Result<Self> {
        let m = m_chi.si_as(Dim::MASS)?;
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::invalid("m_chi", format!("must be positive, got {m} kg")));
        }
        check_charge(q_chi)?;
        Ok(Self {
            m_chi,
            q_chi,
            f_q: DEFAULT_F_Q,
            rho_dm: Quantity::new(DEFAULT_RHO_DM_GEV_CM3, Unit::GEV_PER_CM3),
            dist: dist.reparameterized(m),
        })
    }

    pub fn with_charge(mut self, q_chi: f64) -> Result<Self> {
        check_charge(q_chi)?;
        self.q_chi = q_chi;
        Ok(self)
    }

    pub fn with_mass(self, m_chi: Quantity) -> Result<Self> {
        let Self { q_chi, f_q, rho_dm, dist, .. } = self;
        Ok(Self {
            f_q,
            rho_dm,
            ..Self::new(m_chi, q_chi, dist)?
        })
    }

    pub fn with_f_q(mut self, f_q: f64) -> Result<Self> {
        if !(f_q > 0.0 && f_q <= 1.0) {
            return Err(Error::invalid("f_q", format!("must lie in (0, 1], got {f_q}")));
        }
        self.f_q = f_q;
        Ok(self)
    }

    pub fn with_rho_dm(mut self, rho: Quantity) -> Result<Self> {
        let r = rho.si_as(Dim::MASS_DENSITY)?;
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::invalid("rho_dm", format!("must be positive, got {r} kg/m^3")));
        }
        self.rho_dm = rho;
        Ok(self)
    }

    pub fn m_chi(&self) -> Quantity {
        self.m_chi
    }

    pub fn q_chi(&self) -> f64 {
        self.q_chi
    }

    pub fn f_q(&self) -> f64 {
        self.f_q
    }

    pub fn rho_dm(&self) -> Quantity {
        self.rho_dm
    }

    pub fn dist(&self) -> &VelocityDistribution {
        &self.dist
    }

    pub fn projectile(&self) -> ParticleSpecies {
        ParticleSpecies::new("chi", self.m_chi, self.q_chi).expect("validated on construction")
    }
}

fn check_charge(q: f64) -> Result<()> {
    if !(q > 0.0 && q.is_finite()) {
        return Err(Error::invalid("q_chi", format!("must be positive, got {q}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RateOptions {
    pub impulse: ImpulseConvention,
    pub vmin_mode: KinematicMode,
    pub apply_acceptance: bool,
}

impl Default for RateOptions {
    fn default() -> Self {
        Self {
            impulse: ImpulseConvention::default(),
            vmin_mode: KinematicMode::default(),
            apply_acceptance: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateResult {
    /// Events per second summed over all sensors; may underflow to 0.
    pub rate: Quantity,
    /// Natural log of `rate` in 1/s; `-inf` for a kinematically dead setup.
    pub ln_rate: f64,
    pub dp_th: Quantity,
    pub options: RateOptions,
    /// Quadrature error estimate relative to the rate.
    pub rel_err: f64,
}

/// `n_χ = f_q·ρ/m_χ`.
pub fn number_density(model: &MdmModel) -> Quantity {
    model.rho_dm * model.f_q / model.m_chi
}

/// Single-sensor spectrum dR/dΔp.
pub fn differential_rate(model: &MdmModel, trap: &TrapConfig, dp: Quantity, opts: RateOptions) -> Result<Quantity> {
    let p = dp.si_as(Dim::MOMENTUM)?;
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::invalid("dp", format!("must be positive, got {p}")));
    }
    let s = Spectrum::new(model, trap, opts);
    let ln = s.ln_prefactor() - 3.0 * p.ln() + s.ln_eta(p)?;
    Ok(Quantity::new_si(ln.exp(), Dim::RATE_PER_MOMENTUM))
}

/// Rate of above-threshold kicks summed over `trap.n_sensors()`.
pub fn integrated_rate(model: &MdmModel, trap: &TrapConfig, opts: RateOptions) -> Result<RateResult> {
    let th = sql_threshold(trap).dp_sql.si();
    let s = Spectrum::new(model, trap, opts);
    let (ln_i, rel_err) = s.ln_integral_above(th)?;
    let ln_rate = (trap.n_sensors() as f64).ln() + s.ln_prefactor() + ln_i;
    Ok(RateResult {
        rate: Quantity::new_si(ln_rate.exp(), Dim::FREQUENCY),
        ln_rate,
        dp_th: Quantity::new(th, Unit::KG_M_PER_S),
        options: opts,
        rel_err,
    })
}

/// The SI pieces of the spectrum for one (model, trap, options) triple.
pub(crate) struct Spectrum {
    n_chi: f64,
    lambda: f64,
    target_kg: f64,
    projectile_kg: f64,
    dist: VelocityDistribution,
    opts: RateOptions,
}

impl Spectrum {
    pub(crate) fn new(model: &MdmModel, trap: &TrapConfig, opts: RateOptions) -> Self {
        let target = trap.species();
        Self {
            n_chi: number_density(model).si(),
            lambda: opts.impulse.factor() * COULOMB_LAMBDA * (model.q_chi * target.charge_e()).abs(),
            target_kg: target.mass_kg(),
            projectile_kg: model.m_chi.si(),
            dist: model.dist,
            opts,
        }
    }

    /// `ln(n_χ·2π·λ²)`.
    fn ln_prefactor(&self) -> f64 {
        (self.n_chi * 2.0 * PI).ln() + 2.0 * self.lambda.ln()
    }

    fn v_min(&self, p: f64) -> f64 {
        self.opts.vmin_mode.v_min_si(p, self.target_kg, self.projectile_kg)
    }

    fn ln_eta(&self, p: f64) -> Result<f64> {
        self.dist.ln_eta_si(self.v_min(p))
    }

    /// Largest kick the distribution can deliver, if bounded.
    fn dp_max(&self) -> Option<f64> {
        self.dist
            .max_speed_si()
            .map(|v| self.opts.vmin_mode.max_transfer_si(v, self.target_kg, self.projectile_kg))
    }

    /// Momentum at which `v_min` takes the value `v`.
    fn dp_at_speed(&self, v: f64) -> f64 {
        self.opts.vmin_mode.max_transfer_si(v, self.target_kg, self.projectile_kg)
    }

    /// Points in Δp where the integrand changes character.
    fn breakpoints(&self, th: f64) -> Vec<f64> {
        let mut pts = Vec::new();
        match self.dist {
            VelocityDistribution::MaxwellBoltzmann { .. } => {
                // where η has fallen by e^-j relative to threshold
                let s = self.dist.characteristic_speed();
                let v_th = self.v_min(th);
                for j in [1.0 / 64.0, 1.0 / 16.0, 0.25, 1.0, 4.0, 16.0, 64.0] {
                    pts.push(self.dp_at_speed((v_th * v_th + j * s * s).sqrt()));
                }
            }
            VelocityDistribution::StandardHalo { v_esc, v_earth, .. } => {
                pts.push(self.dp_at_speed((v_esc - v_earth).abs()));
            }
            VelocityDistribution::Monochromatic { .. } => {}
        }
        pts.retain(|&p| p > th);
        pts.sort_by(f64::total_cmp);
        pts
    }

    /// `ln ∫_{th} Δp⁻³ η(v_min(Δp)) [f_A] dΔp` and its relative error.
    ///
    /// With acceptance the substitution Δp = th·cosh w turns the integrand
    /// into `th⁻²·sinh²w/cosh⁴w·η`; without it Δp = th·e^w gives
    /// `th⁻²·e^{−2w}·η`. η is divided by its threshold value so the
    /// integral stays O(1) however deep in a tail the threshold sits.
    pub(crate) fn ln_integral_above(&self, th: f64) -> Result<(f64, f64)> {
        let ln_eta_th = self.ln_eta(th)?;
        let dp_max = self.dp_max();
        if ln_eta_th == f64::NEG_INFINITY || dp_max.is_some_and(|m| m <= th) {
            return Ok((f64::NEG_INFINITY, 0.0));
        }
        let accept = self.opts.apply_acceptance;
        let to_w = |p: f64| if accept { (p / th).acosh() } else { (p / th).ln() };
        let mut failure = None;
        let mut integrand = |w: f64| {
            let (p, jac) = if accept {
                let c = w.cosh();
                (th * c, w.sinh().powi(2) / c.powi(4))
            } else {
                (th * w.exp(), (-2.0 * w).exp())
            };
            match self.ln_eta(p) {
                Ok(l) => jac * (l - ln_eta_th).exp(),
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            }
        };
        let opts = QuadOptions::rel(RATE_REL_TOL * 1e-2);

        let mut edges = vec![th];
        edges.extend(self.breakpoints(th));
        if let Some(m) = dp_max {
            edges.retain(|&p| p < m);
            edges.push(m);
        }
        let mut total = 0.0;
        let mut err = 0.0;
        for pair in edges.windows(2) {
            let r = integrate(&mut integrand, to_w(pair[0]), to_w(pair[1]), opts)?;
            total += r.value;
            err += r.abs_err;
        }
        if dp_max.is_none() {
            // open tail: one decade at a time
            let mut lo = *edges.last().expect("nonempty");
            loop {
                let hi = 10.0 * lo;
                let r = integrate(&mut integrand, to_w(lo), to_w(hi), opts)?;
                total += r.value;
                err += r.abs_err;
                if r.value <= TAIL_CUTOFF * total {
                    break;
                }
                lo = hi;
                if !hi.is_finite() {
                    return Err(Error::invalid("distribution", "rate tail does not converge"));
                }
            }
        }
        if let Some(e) = failure {
            return Err(e);
        }
        if total <= 0.0 {
            return Ok((f64::NEG_INFINITY, 0.0));
        }
        Ok((total.ln() + ln_eta_th - 2.0 * th.ln(), err / total))
    }
}
