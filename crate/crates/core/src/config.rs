//! JSON run configuration. Every block is optional and falls back to the
//! defaults below; unknown keys anywhere are rejected. Command-line flags
//! are applied on top of a loaded config before [`RunConfig::validate`].

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{ImpulseConvention, KinematicMode};
use crate::rate::{MdmModel, RateOptions, DEFAULT_F_Q, DEFAULT_RHO_DM_GEV_CM3};
use crate::sensitivity::{log_grid, Exposure};
use crate::species::{species_by_name, ParticleSpecies};
use crate::trap::{TrapConfig, TrapKind};
use crate::units::{Quantity, Unit};
use crate::validate::{Axis, BCut};
use crate::velocity::{Direction, VelocityDistribution, HALO_V0_KMS, HALO_VEARTH_KMS, HALO_VESC_KMS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub trap: TrapBlock,
    pub model: ModelBlock,
    pub distribution: DistributionBlock,
    pub exposure: ExposureBlock,
    pub conventions: Conventions,
    pub mass_grid: Grid,
    pub energy_grid: Grid,
    /// Kick grid in eV/c for the differential spectrum of `rate`.
    pub dp_grid: Option<Grid>,
    pub flux: FluxBlock,
    pub tof: TofBlock,
    pub mc: McBlock,
    pub ode: OdeBlock,
    pub point: PointBlock,
    pub output: Option<PathBuf>,
    pub format: Format,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            trap: TrapBlock::default(),
            model: ModelBlock::default(),
            distribution: DistributionBlock::default(),
            exposure: ExposureBlock::default(),
            conventions: Conventions::default(),
            mass_grid: Grid::range(1e-3, 1e3, 25),
            energy_grid: Grid::range(1e-2, 1e12, 57),
            dp_grid: None,
            flux: FluxBlock::default(),
            tof: TofBlock::default(),
            mc: McBlock::default(),
            ode: OdeBlock::default(),
            point: PointBlock::default(),
            output: None,
            format: Format::Csv,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Exactly one of `omega_rad_s` and `freq_hz` may be set; with neither the
/// trap runs at 1e9 rad/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrapBlock {
    pub kind: TrapKind,
    pub species: String,
    pub omega_rad_s: Option<f64>,
    pub freq_hz: Option<f64>,
    pub n_sensors: u64,
    pub electrode_distance_um: Option<f64>,
    pub heating_rate_per_s: Option<f64>,
}

pub const DEFAULT_OMEGA_RAD_S: f64 = 1e9;

impl Default for TrapBlock {
    fn default() -> Self {
        Self {
            kind: TrapKind::Penning,
            species: "electron".into(),
            omega_rad_s: None,
            freq_hz: None,
            n_sensors: 1,
            electrode_distance_um: None,
            heating_rate_per_s: None,
        }
    }
}

impl TrapBlock {
    pub fn build(&self) -> Result<TrapConfig> {
        let species = species_by_name(&self.species)?;
        let omega = match (self.omega_rad_s, self.freq_hz) {
            (Some(_), Some(_)) => {
                return Err(Error::Config("trap: give omega_rad_s or freq_hz, not both".into()));
            }
            (Some(w), None) => Quantity::new(w, Unit::RAD_PER_S),
            (None, Some(f)) => Quantity::new(f, Unit::HZ),
            (None, None) => Quantity::new(DEFAULT_OMEGA_RAD_S, Unit::RAD_PER_S),
        };
        let mut trap = TrapConfig::new(self.kind, omega, species)?.with_sensors(self.n_sensors)?;
        if let Some(d) = self.electrode_distance_um {
            trap = trap.with_electrode_distance(Quantity::new(d, Unit::UM))?;
        }
        if let Some(g) = self.heating_rate_per_s {
            trap = trap.with_heating_rate(Quantity::new(g, Unit::PER_S))?;
        }
        Ok(trap)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelBlock {
    pub m_chi_gev: f64,
    pub q_chi: f64,
    pub f_q: f64,
    pub rho_dm_gev_cm3: f64,
}

impl Default for ModelBlock {
    fn default() -> Self {
        Self {
            m_chi_gev: 1.0,
            q_chi: 1e-3,
            f_q: DEFAULT_F_Q,
            rho_dm_gev_cm3: DEFAULT_RHO_DM_GEV_CM3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum DistributionBlock {
    Mb {
        #[serde(rename = "T_K")]
        t_k: f64,
    },
    Halo {
        #[serde(default = "halo_v0")]
        v0_kms: f64,
        #[serde(default = "halo_vesc")]
        vesc_kms: f64,
        #[serde(default = "halo_vearth")]
        vearth_kms: f64,
    },
    Mono {
        v_kms: f64,
        /// Fixed lab direction; isotropic when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        direction: Option<[f64; 3]>,
    },
}

fn halo_v0() -> f64 {
    HALO_V0_KMS
}
fn halo_vesc() -> f64 {
    HALO_VESC_KMS
}
fn halo_vearth() -> f64 {
    HALO_VEARTH_KMS
}

impl Default for DistributionBlock {
    fn default() -> Self {
        DistributionBlock::Mb { t_k: 300.0 }
    }
}

impl DistributionBlock {
    pub fn halo_default() -> Self {
        DistributionBlock::Halo {
            v0_kms: HALO_V0_KMS,
            vesc_kms: HALO_VESC_KMS,
            vearth_kms: HALO_VEARTH_KMS,
        }
    }

    /// The distribution for a projectile of mass `mass`; thermal speeds
    /// depend on it, the others do not.
    pub fn build(&self, mass: Quantity) -> Result<VelocityDistribution> {
        let kms = |v: f64| Quantity::new(v, Unit::KM_PER_S);
        match *self {
            DistributionBlock::Mb { t_k } => VelocityDistribution::maxwell_boltzmann(t_k, mass),
            DistributionBlock::Halo {
                v0_kms,
                vesc_kms,
                vearth_kms,
            } => VelocityDistribution::standard_halo(kms(v0_kms), kms(vesc_kms), kms(vearth_kms)),
            DistributionBlock::Mono { v_kms, direction } => {
                let dir = direction.map_or(Direction::Isotropic, Direction::Fixed);
                VelocityDistribution::monochromatic(kms(v_kms), dir)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExposureBlock {
    pub t_obs_days: f64,
    pub n_required: f64,
}

impl Default for ExposureBlock {
    fn default() -> Self {
        Self {
            t_obs_days: 1.0,
            n_required: 3.0,
        }
    }
}

impl ExposureBlock {
    pub fn build(&self) -> Result<Exposure> {
        Exposure::new(Quantity::new(self.t_obs_days, Unit::DAY), self.n_required)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Conventions {
    pub impulse: ImpulseConvention,
    pub vmin_mode: KinematicMode,
    pub acceptance: bool,
}

impl Default for Conventions {
    fn default() -> Self {
        Self {
            impulse: ImpulseConvention::PaperEq2,
            vmin_mode: KinematicMode::PaperLinear,
            acceptance: true,
        }
    }
}

impl Conventions {
    pub fn options(&self) -> RateOptions {
        RateOptions {
            impulse: self.impulse,
            vmin_mode: self.vmin_mode,
            apply_acceptance: self.acceptance,
        }
    }
}

/// Either an explicit list or `n` log-spaced points from `lo` to `hi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default)]
    pub lo: f64,
    #[serde(default)]
    pub hi: f64,
    #[serde(default)]
    pub n: usize,
}

impl Grid {
    pub fn range(lo: f64, hi: f64, n: usize) -> Self {
        Self {
            values: None,
            lo,
            hi,
            n,
        }
    }

    pub fn points(&self, name: &'static str) -> Result<Vec<f64>> {
        let pts = match &self.values {
            Some(v) => v.clone(),
            None => {
                if !(self.lo > 0.0 && self.hi >= self.lo && self.hi.is_finite() && self.n >= 1) {
                    return Err(Error::invalid(
                        name,
                        format!("need 0 < lo <= hi and n >= 1, got lo={} hi={} n={}", self.lo, self.hi, self.n),
                    ));
                }
                if self.n > 1 && self.hi == self.lo {
                    return Err(Error::invalid(name, "lo == hi with more than one point"));
                }
                log_grid(self.lo, self.hi, self.n)
            }
        };
        if pts.is_empty() {
            return Err(Error::invalid(name, "must not be empty"));
        }
        if pts.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
            return Err(Error::invalid(name, "values must be positive and finite"));
        }
        if pts.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid(name, "must be strictly increasing"));
        }
        Ok(pts)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FluxBlock {
    pub projectile: String,
    pub rate_per_day: f64,
}

impl Default for FluxBlock {
    fn default() -> Self {
        Self {
            projectile: "electron".into(),
            rate_per_day: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TofBlock {
    pub projectile: String,
    pub baseline_mm: f64,
    pub energy_ev: f64,
    pub de_ev: f64,
    /// Speed at which to quote the velocity resolution; derived from
    /// `energy_ev` when absent.
    pub v_kms: Option<f64>,
}

impl Default for TofBlock {
    fn default() -> Self {
        Self {
            projectile: "electron".into(),
            baseline_mm: 10.0,
            energy_ev: 1.0,
            de_ev: 1.0,
            v_kms: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McBlock {
    pub n_samples: u64,
    /// Sampling disk radius; chosen from the threshold when absent.
    pub b_cut_m: Option<f64>,
    pub bins_per_decade: u32,
    pub decades: u32,
    /// Also bisect the sampled rate for the minimum charge.
    pub bisect: bool,
}

impl Default for McBlock {
    fn default() -> Self {
        Self {
            n_samples: 1_000_000,
            b_cut_m: None,
            bins_per_decade: 5,
            decades: 6,
            bisect: false,
        }
    }
}

impl McBlock {
    pub fn b_cut(&self) -> BCut {
        self.b_cut_m.map_or(BCut::Auto, BCut::Fixed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OdeBlock {
    /// Impact parameter; by default the fastest pass of the sweep runs at
    /// 0.05c.
    pub b_m: Option<f64>,
    pub omega_taus: Vec<f64>,
    /// Single pass at this speed instead of the ωτ sweep.
    pub v_kms: Option<f64>,
    pub axis: Axis,
    pub rtol: f64,
    pub projectile_q: f64,
    pub projectile_mass_gev: f64,
}

impl Default for OdeBlock {
    fn default() -> Self {
        Self {
            b_m: None,
            omega_taus: log_grid(1e-5, 10.0, 13),
            v_kms: None,
            axis: Axis::Y,
            rtol: 1e-10,
            projectile_q: 1e-12,
            projectile_mass_gev: 1.0,
        }
    }
}

/// Speed of the fastest default pass, in units of c.
pub const ODE_FASTEST_BETA: f64 = 0.05;

impl OdeBlock {
    pub fn impact_parameter(&self, trap: &TrapConfig) -> Quantity {
        let b = self.b_m.unwrap_or_else(|| {
            let wt_min = self.omega_taus.iter().copied().fold(f64::INFINITY, f64::min);
            ODE_FASTEST_BETA * crate::constants::C * wt_min / trap.omega_si()
        });
        Quantity::new(b, Unit::M)
    }

    pub fn projectile(&self) -> Result<ParticleSpecies> {
        ParticleSpecies::new("chi", Quantity::new(self.projectile_mass_gev, Unit::GEV_MASS), self.projectile_q)
    }
}

/// Inputs of single-point queries (`threshold`, `xsec`, `rate`, `units`).
/// Absent values skip the corresponding output line.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PointBlock {
    pub v_m_s: Option<f64>,
    pub b_nm: Option<f64>,
    pub dp_evc: Option<f64>,
    pub vmin_kms: Option<f64>,
    pub new_distance_um: Option<f64>,
    pub new_species: Option<String>,
    /// Number of velocities to draw from the distribution.
    pub draw: Option<u64>,
    pub convert: Option<ConvertSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvertSpec {
    pub value: f64,
    pub from: String,
    pub to: String,
}

impl PointBlock {
    fn validate(&self) -> Result<()> {
        for (name, x) in [
            ("speed", self.v_m_s),
            ("impact parameter", self.b_nm),
            ("electrode distance", self.new_distance_um),
        ] {
            if let Some(x) = x {
                if !(x > 0.0 && x.is_finite()) {
                    return Err(Error::invalid(name, format!("must be positive, got {x}")));
                }
            }
        }
        for (name, x) in [("dp", self.dp_evc), ("v_min", self.vmin_kms)] {
            if let Some(x) = x {
                if !(x >= 0.0 && x.is_finite()) {
                    return Err(Error::invalid(name, format!("must be non-negative, got {x}")));
                }
            }
        }
        if let Some(s) = &self.new_species {
            species_by_name(s)?;
        }
        if let Some(c) = &self.convert {
            Unit::parse(&c.from)?;
            Unit::parse(&c.to)?;
        }
        Ok(())
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config is plain data")
    }

    pub fn trap(&self) -> Result<TrapConfig> {
        self.trap.build()
    }

    pub fn model(&self) -> Result<MdmModel> {
        let m = Quantity::new(self.model.m_chi_gev, Unit::GEV_MASS);
        let dist = self.distribution.build(m)?;
        MdmModel::new(m, self.model.q_chi, dist)?
            .with_f_q(self.model.f_q)?
            .with_rho_dm(Quantity::new(self.model.rho_dm_gev_cm3, Unit::GEV_PER_CM3))
    }

    pub fn exposure(&self) -> Result<Exposure> {
        self.exposure.build()
    }

    pub fn options(&self) -> RateOptions {
        self.conventions.options()
    }

    /// Build every block so that a bad value anywhere fails before any
    /// computation starts.
    pub fn validate(&self) -> Result<()> {
        self.trap()?;
        self.model()?;
        self.exposure()?;
        self.mass_grid.points("mass grid")?;
        self.energy_grid.points("energy grid")?;
        if let Some(g) = &self.dp_grid {
            g.points("dp grid")?;
        }
        species_by_name(&self.flux.projectile)?;
        if !(self.flux.rate_per_day > 0.0 && self.flux.rate_per_day.is_finite()) {
            return Err(Error::invalid("rate target", "must be positive"));
        }
        species_by_name(&self.tof.projectile)?;
        for (name, x) in [
            ("baseline", self.tof.baseline_mm),
            ("energy", self.tof.energy_ev),
            ("energy resolution", self.tof.de_ev),
        ] {
            if !(x > 0.0 && x.is_finite()) {
                return Err(Error::invalid(name, format!("must be positive, got {x}")));
            }
        }
        if self.mc.n_samples == 0 {
            return Err(Error::invalid("mc samples", "must be at least 1"));
        }
        if self.mc.bins_per_decade == 0 || self.mc.decades == 0 {
            return Err(Error::invalid("mc binning", "bins per decade and decades must be positive"));
        }
        if let Some(b) = self.mc.b_cut_m {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::invalid("b_cut", format!("must be positive, got {b} m")));
            }
        }
        self.ode.projectile()?;
        if self.ode.omega_taus.is_empty() || self.ode.omega_taus.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::invalid("omega_tau", "sweep must be a nonempty list of positive values"));
        }
        if self.ode.b_m.is_some_and(|b| !(b > 0.0 && b.is_finite())) {
            return Err(Error::invalid("impact parameter", "must be positive"));
        }
        if !(self.ode.rtol > 0.0 && self.ode.rtol < 1e-3) {
            return Err(Error::invalid("tolerance", "must lie in (0, 1e-3)"));
        }
        self.point.validate()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_the_default() {
        let c = RunConfig::from_json("{}").unwrap();
        assert_eq!(c, RunConfig::default());
        c.validate().unwrap();
        assert_eq!(c.trap().unwrap().omega_si(), 1e9);
    }

    #[test]
    fn round_trips_through_json() {
        let c = RunConfig {
            distribution: DistributionBlock::Mono {
                v_kms: 300.0,
                direction: Some([0.0, 0.0, 1.0]),
            },
            mass_grid: Grid {
                values: Some(vec![0.1, 1.0]),
                lo: 0.0,
                hi: 0.0,
                n: 0,
            },
            output: Some("out/x.csv".into()),
            ..RunConfig::default()
        };
        let back = RunConfig::from_json(&c.to_json().to_string()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for bad in [
            r#"{"bogus": 1}"#,
            r#"{"trap": {"omega": 1e9}}"#,
            r#"{"distribution": {"type": "mb", "T_K": 4, "extra": 0}}"#,
            r#"{"distribution": {"type": "warm", "T_K": 4}}"#,
            r#"{"mass_grid": {"lo": 1, "hi": 2, "n": 3, "step": 1}}"#,
        ] {
            assert!(matches!(RunConfig::from_json(bad), Err(Error::Config(_))), "{bad}");
        }
    }

    #[test]
    fn distribution_blocks_parse() {
        let c = RunConfig::from_json(r#"{"distribution": {"type": "halo"}}"#).unwrap();
        assert_eq!(c.distribution, DistributionBlock::halo_default());
        let c = RunConfig::from_json(r#"{"distribution": {"type": "mb", "T_K": 4}}"#).unwrap();
        assert_eq!(c.distribution, DistributionBlock::Mb { t_k: 4.0 });
        let c = RunConfig::from_json(r#"{"distribution": {"type": "mono", "v_kms": 100}}"#).unwrap();
        let d = c.distribution.build(Quantity::new(1.0, Unit::GEV_MASS)).unwrap();
        assert_eq!(d.name(), "mono");
    }

    #[test]
    fn frequency_in_hz_is_cyclic() {
        let c = RunConfig::from_json(r#"{"trap": {"freq_hz": 1e8}}"#).unwrap();
        let w = c.trap().unwrap().omega_si();
        assert!((w / (std::f64::consts::TAU * 1e8) - 1.0).abs() < 1e-15);
        let both = RunConfig::from_json(r#"{"trap": {"freq_hz": 1e8, "omega_rad_s": 1e9}}"#).unwrap();
        assert!(both.validate().is_err());
    }

    #[test]
    fn bad_values_fail_validation() {
        let cases = [
            r#"{"trap": {"omega_rad_s": -1}}"#,
            r#"{"trap": {"species": "muon"}}"#,
            r#"{"model": {"f_q": 2}}"#,
            r#"{"exposure": {"t_obs_days": 0}}"#,
            r#"{"mass_grid": {"values": [1, 0.5]}}"#,
            r#"{"energy_grid": {"lo": 0, "hi": 1, "n": 3}}"#,
            r#"{"mc": {"n_samples": 0}}"#,
            r#"{"ode": {"omega_taus": []}}"#,
            r#"{"distribution": {"type": "mb", "T_K": -4}}"#,
        ];
        for text in cases {
            let c = RunConfig::from_json(text).unwrap();
            assert!(c.validate().is_err(), "{text}");
        }
    }
}
