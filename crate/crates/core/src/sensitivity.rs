//! Inverting rates into the smallest detectable millicharge per mass, and
//! into the smallest detectable flux of ambient charged particles.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::{C, CONSTANT_SET};
use crate::error::{Error, Result};
use crate::kinematics::{effective_cross_section, ImpulseConvention};
use crate::rate::{integrated_rate, MdmModel, RateOptions};
use crate::species::ParticleSpecies;
use crate::trap::TrapConfig;
use crate::units::{Dim, Quantity, Unit};

/// Written in place of a value at grid points with no sensitivity.
pub const DEAD_POINT: &str = "no-sensitivity";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exposure {
    t_obs: Quantity,
    n_required: f64,
}

impl Default for Exposure {
    /// One day, three events (background-free ~95% CL).
    fn default() -> Self {
        Self {
            t_obs: Quantity::new(1.0, Unit::DAY),
            n_required: 3.0,
        }
    }
}

impl Exposure {
    pub fn new(t_obs: Quantity, n_required: f64) -> Result<Self> {
        let t = t_obs.si_as(Dim::TIME)?;
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::invalid("t_obs", format!("must be positive, got {t} s")));
        }
        if !(n_required > 0.0 && n_required.is_finite()) {
            return Err(Error::invalid("n_required", format!("must be positive, got {n_required}")));
        }
        Ok(Self { t_obs, n_required })
    }

    pub fn t_obs(&self) -> Quantity {
        self.t_obs
    }

    pub fn n_required(&self) -> f64 {
        self.n_required
    }
}

/// Smallest q_χ (units of e) giving `n_required` expected events. Exact
/// because the rate is λ² times a charge-independent integral.
pub fn min_charge(model: &MdmModel, trap: &TrapConfig, exposure: &Exposure, opts: RateOptions) -> Result<f64> {
    let unit = model.clone().with_charge(1.0)?;
    let r1 = integrated_rate(&unit, trap, opts)?;
    let ln_q = 0.5 * (exposure.n_required.ln() - exposure.t_obs.si().ln() - r1.ln_rate);
    let q = ln_q.exp();
    if !q.is_finite() || q <= 0.0 {
        return Err(Error::NoSensitivity(format!(
            "m_chi = {:.6e} GeV: ln R(q=1) = {:.6e}, q_min out of range",
            model.m_chi().value_in(Unit::GEV_MASS)?,
            r1.ln_rate
        )));
    }
    Ok(q)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityPoint {
    pub m_chi_gev: f64,
    /// `None` marks a dead point.
    pub q_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityCurve {
    pub points: Vec<SensitivityPoint>,
    pub metadata: Vec<(String, String)>,
}

impl SensitivityCurve {
    pub fn masses(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.m_chi_gev).collect()
    }

    pub fn q_min(&self) -> Vec<Option<f64>> {
        self.points.iter().map(|p| p.q_min).collect()
    }

    pub fn all_finite(&self) -> bool {
        self.points.iter().all(|p| p.q_min.is_some_and(f64::is_finite))
    }
}

/// q_min over a mass grid. `template` supplies f_q, ρ and the distribution
/// family; thermal distributions are re-parameterized per mass. Points are
/// evaluated in parallel and returned in grid order; failures become dead
/// points.
pub fn sensitivity_curve(
    mass_grid_gev: &[f64],
    template: &MdmModel,
    trap: &TrapConfig,
    exposure: &Exposure,
    opts: RateOptions,
) -> Result<SensitivityCurve> {
    if mass_grid_gev.is_empty() {
        return Err(Error::invalid("mass grid", "must not be empty"));
    }
    if mass_grid_gev.iter().any(|m| !(*m > 0.0 && m.is_finite())) {
        return Err(Error::invalid("mass grid", "masses must be positive"));
    }
    if mass_grid_gev.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("mass grid", "must be strictly increasing"));
    }
    let points = mass_grid_gev
        .par_iter()
        .map(|&m| {
            let q = template
                .clone()
                .with_mass(Quantity::new(m, Unit::GEV_MASS))
                .and_then(|model| min_charge(&model, trap, exposure, opts));
            match q {
                Ok(q) => SensitivityPoint {
                    m_chi_gev: m,
                    q_min: Some(q),
                    reason: None,
                },
                Err(e) => SensitivityPoint {
                    m_chi_gev: m,
                    q_min: None,
                    reason: Some(e.to_string()),
                },
            }
        })
        .collect();
    let mut metadata = trap_metadata(trap);
    metadata.extend([
        ("distribution".into(), serde_json::to_string(template.dist()).expect("plain data")),
        ("f_q".into(), format!("{:e}", template.f_q())),
        (
            "rho_dm_GeV_cm3".into(),
            format!("{:e}", template.rho_dm().value_in(Unit::GEV_PER_CM3)?),
        ),
        ("t_obs_s".into(), format!("{:e}", exposure.t_obs.si())),
        ("n_required".into(), format!("{:e}", exposure.n_required)),
        ("impulse_convention".into(), opts.impulse.name().into()),
        ("vmin_mode".into(), opts.vmin_mode.name().into()),
        ("acceptance".into(), opts.apply_acceptance.to_string()),
    ]);
    Ok(SensitivityCurve { points, metadata })
}

fn trap_metadata(trap: &TrapConfig) -> Vec<(String, String)> {
    vec![
        ("constants".into(), CONSTANT_SET.into()),
        (
            "trap_kind".into(),
            serde_json::to_string(&trap.kind()).expect("plain data").trim_matches('"').into(),
        ),
        ("trap_species".into(), trap.species().label().into()),
        ("omega_rad_s".into(), format!("{:e}", trap.omega_si())),
        ("n_sensors".into(), trap.n_sensors().to_string()),
    ]
}

/// Lab speed of a projectile with kinetic energy `e_kin`.
pub fn speed_from_kinetic_energy(e_kin: Quantity, projectile: &ParticleSpecies) -> Result<Quantity> {
    let e = e_kin.si_as(Dim::ENERGY)?;
    if !(e > 0.0 && e.is_finite()) {
        return Err(Error::invalid("kinetic energy", format!("must be positive, got {e} J")));
    }
    let gamma = 1.0 + e / (projectile.mass_kg() * C * C);
    // 1 − 1/γ² written to keep precision at small E/mc²
    let eps = gamma - 1.0;
    let beta2 = eps * (2.0 + eps) / (gamma * gamma);
    Ok(Quantity::new(C * beta2.sqrt().min(1.0), Unit::M_PER_S))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FluxPoint {
    pub e_ev: f64,
    pub flux_cm2_day: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FluxCurve {
    pub points: Vec<FluxPoint>,
    pub metadata: Vec<(String, String)>,
}

/// Flux giving `rate_target` above-threshold kicks across the sensor array:
/// `Φ_min = rate / (σ_eff(v(E))·n_sensors)`, with σ_eff for a unit charge
/// and no acceptance factor.
pub fn flux_curve(
    energies_ev: &[f64],
    trap: &TrapConfig,
    projectile: &ParticleSpecies,
    rate_target: Quantity,
    conv: ImpulseConvention,
) -> Result<FluxCurve> {
    let r = rate_target.si_as(Dim::FREQUENCY)?;
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::invalid("rate target", format!("must be positive, got {r} 1/s")));
    }
    if energies_ev.is_empty() {
        return Err(Error::invalid("energy grid", "must not be empty"));
    }
    let points = energies_ev
        .iter()
        .map(|&e| {
            let v = speed_from_kinetic_energy(Quantity::new(e, Unit::EV), projectile)?;
            let sigma = effective_cross_section(trap, 1.0, v, conv)?;
            let flux = rate_target / (sigma * trap.n_sensors() as f64);
            Ok(FluxPoint {
                e_ev: e,
                flux_cm2_day: flux.value_in(Unit::PER_CM2_DAY)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut metadata = trap_metadata(trap);
    metadata.extend([
        ("projectile".into(), projectile.label().into()),
        ("rate_target_per_day".into(), format!("{:e}", rate_target.value_in(Unit::PER_DAY)?)),
        ("impulse_convention".into(), conv.name().into()),
    ]);
    Ok(FluxCurve { points, metadata })
}

/// Least-squares slope of ln Φ against ln E.
pub fn log_log_slope(points: &[FluxPoint]) -> f64 {
    let xs: Vec<f64> = points.iter().map(|p| p.e_ev.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.flux_cm2_day.ln()).collect();
    least_squares_slope(&xs, &ys)
}

pub(crate) fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    // base 10 so decade points come out exact
    let (a, b) = (lo.log10(), hi.log10());
    let mut g: Vec<f64> = (0..n).map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64)).collect();
    g[0] = lo;
    g[n - 1] = hi;
    g
}
