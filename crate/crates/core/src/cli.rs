//! Command-line front end. Precedence, lowest first: built-in defaults, the
//! `--config` JSON file, then flags. The merged config is validated before
//! anything is computed and is recorded verbatim in each output manifest.
//!
//! Exit status: 0 on success, 1 for usage, config or validation errors, 2
//! for numeric failures and IO. Errors are reported on stderr as a single
//! JSON object.

use std::ffi::OsString;
use std::path::PathBuf;
use std::io::Write;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde_json::json;

use crate::config::{ConvertSpec, DistributionBlock, Format, Grid, RunConfig};
use crate::constants::C;
use crate::error::{Error, Result};
use crate::kinematics::{
    acceptance, effective_cross_section, flyby_time, impulse, impulsive_ok, v_min, FlybyEvent, ImpulseConvention,
    KinematicMode,
};
use crate::output::{emit_curve, regime_table, resolve_output_path, spectrum_table, write_manifest, Cell, RunClock, Table};
use crate::rate::{differential_rate, integrated_rate, number_density, RateOptions};
use crate::sensitivity::{flux_curve, min_charge, sensitivity_curve};
use crate::species::{builtin_species, species_by_name};
use crate::tof::{energy_resolution, required_baseline, timing_resolution, velocity_resolution, TofSetup};
use crate::trap::{duty_cycle_max, energy_deposit, scale_heating_rate, sql_threshold, TrapKind};
use crate::units::{Quantity, Unit};
use crate::validate::{mc_min_charge, mc_spectrum, ode_flyby, validate_impulse_regime, Axis, McRun, OdeScenario};

#[derive(Debug, Parser)]
#[command(name = "trapsense", version, about = "Trapped-particle impulse sensor forecasts")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Quantum-limited threshold of the monitored mode, kick energies and
    /// heating-rate bookkeeping.
    Threshold(ThresholdArgs),
    /// Effective cross section, and for a given impact parameter or kick the
    /// fly-by impulse, timing and minimum speed.
    Xsec(XsecArgs),
    /// Number density, differential and integrated event rate.
    Rate(RateArgs),
    /// Minimum detectable charge over a mass grid.
    Sensitivity(SensitivityArgs),
    /// Minimum detectable flux over a kinetic-energy grid.
    Flux(FluxArgs),
    /// Two-trap time-of-flight planning.
    Tof(TofArgs),
    /// Numerical cross-checks of the impulse and rate models.
    #[command(subcommand)]
    Validate(ValidateCommand),
    /// Unit conversion and the built-in species table.
    Units(UnitsArgs),
}

#[derive(Debug, Subcommand)]
pub enum ValidateCommand {
    /// Integrate the trapped particle through a fly-by.
    Ode(OdeArgs),
    /// Monte-Carlo kick spectrum.
    Mc(McArgs),
}

fn serde_value<T: DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(json!(s)).map_err(|e| e.to_string())
}

#[derive(Debug, Args, Default)]
pub struct CommonArgs {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output file. Relative paths go under $TRAPSENSE_OUT_DIR when set.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_parser = serde_value::<Format>)]
    pub format: Option<Format>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args, Default)]
pub struct TrapArgs {
    /// Trapped species: electron, proton or be9+.
    #[arg(long)]
    pub species: Option<String>,
    /// Angular frequency of the monitored mode, rad/s.
    #[arg(long, conflicts_with = "freq_hz")]
    pub omega: Option<f64>,
    /// Cyclic frequency of the monitored mode, Hz (ω = 2π·f).
    #[arg(long)]
    pub freq_hz: Option<f64>,
    /// penning or paul.
    #[arg(long, value_parser = serde_value::<TrapKind>)]
    pub trap_kind: Option<TrapKind>,
    #[arg(long)]
    pub n_sensors: Option<u64>,
}

#[derive(Debug, Args, Default)]
pub struct ConventionArgs {
    /// paper (λ/bv) or exact (2λ/bv).
    #[arg(long, value_parser = serde_value::<ImpulseConvention>)]
    pub impulse_convention: Option<ImpulseConvention>,
    /// paper (Δp/m_target) or reduced-mass (Δp/2µ).
    #[arg(long, value_parser = serde_value::<KinematicMode>)]
    pub vmin_mode: Option<KinematicMode>,
    /// Weight kicks with the single-axis acceptance.
    #[arg(long)]
    pub acceptance: Option<bool>,
}

#[derive(Debug, Args, Default)]
pub struct ModelArgs {
    #[arg(long)]
    pub m_chi_gev: Option<f64>,
    /// Projectile charge in units of e.
    #[arg(long)]
    pub q: Option<f64>,
    /// Dark-matter fraction carried by the charged component.
    #[arg(long)]
    pub f_q: Option<f64>,
    #[arg(long)]
    pub rho_dm_gev_cm3: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DistKind {
    Mb,
    Halo,
    Mono,
}

#[derive(Debug, Args, Default)]
pub struct DistArgs {
    #[arg(long, value_enum)]
    pub dist: Option<DistKind>,
    /// Temperature of a thermal (mb) population.
    #[arg(long)]
    pub temperature_k: Option<f64>,
    #[arg(long)]
    pub v0_kms: Option<f64>,
    #[arg(long)]
    pub vesc_kms: Option<f64>,
    #[arg(long)]
    pub vearth_kms: Option<f64>,
    /// Speed of a monochromatic (mono) beam.
    #[arg(long)]
    pub v_kms: Option<f64>,
    /// Fixed beam direction x,y,z; isotropic when absent.
    #[arg(long, value_delimiter = ',', num_args = 3, allow_hyphen_values = true)]
    pub direction: Option<Vec<f64>>,
}

#[derive(Debug, Args, Default)]
pub struct ExposureArgs {
    #[arg(long)]
    pub t_obs_days: Option<f64>,
    /// Expected events required for a detection.
    #[arg(long)]
    pub n_required: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ThresholdArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub trap: TrapArgs,
    /// Kick whose deposited energy to report, eV/c.
    #[arg(long)]
    pub dp_evc: Option<f64>,
    /// Measured heating rate, quanta/s.
    #[arg(long)]
    pub heating_rate: Option<f64>,
    /// Electrode distance at which the heating rate was measured, µm.
    #[arg(long)]
    pub electrode_distance_um: Option<f64>,
    /// Rescale the heating rate to this electrode distance, µm.
    #[arg(long)]
    pub new_distance_um: Option<f64>,
    /// ...and to this trapped species.
    #[arg(long)]
    pub new_species: Option<String>,
}

#[derive(Debug, Args)]
pub struct XsecArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub trap: TrapArgs,
    #[command(flatten)]
    pub conventions: ConventionArgs,
    /// Projectile charge in units of e.
    #[arg(long)]
    pub q: Option<f64>,
    /// Projectile mass, used for the minimum speed.
    #[arg(long)]
    pub m_chi_gev: Option<f64>,
    #[arg(long, conflicts_with = "v_kms")]
    pub v_over_c: Option<f64>,
    #[arg(long)]
    pub v_kms: Option<f64>,
    /// Impact parameter of a single fly-by, nm.
    #[arg(long)]
    pub b_nm: Option<f64>,
    /// Kick for the minimum-speed and acceptance lines, eV/c.
    #[arg(long)]
    pub dp_evc: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub trap: TrapArgs,
    #[command(flatten)]
    pub conventions: ConventionArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub dist: DistArgs,
    #[command(flatten)]
    pub exposure: ExposureArgs,
    /// Kick at which to evaluate the differential rate, eV/c.
    #[arg(long)]
    pub dp_evc: Option<f64>,
    /// Minimum speed at which to evaluate the mean inverse speed, km/s.
    #[arg(long)]
    pub vmin_kms: Option<f64>,
    /// Draw this many velocities from the distribution into the output file.
    #[arg(long)]
    pub draw: Option<u64>,
    /// Write the differential spectrum over log-spaced kicks from here, eV/c.
    #[arg(long, requires_all = ["dp_hi_evc", "dp_n"])]
    pub dp_lo_evc: Option<f64>,
    #[arg(long, requires = "dp_lo_evc")]
    pub dp_hi_evc: Option<f64>,
    #[arg(long, requires = "dp_lo_evc")]
    pub dp_n: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SensitivityArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub trap: TrapArgs,
    #[command(flatten)]
    pub conventions: ConventionArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub dist: DistArgs,
    #[command(flatten)]
    pub exposure: ExposureArgs,
    #[arg(long)]
    pub m_lo_gev: Option<f64>,
    #[arg(long)]
    pub m_hi_gev: Option<f64>,
    #[arg(long)]
    pub m_n: Option<usize>,
    /// Explicit mass grid, GeV, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub masses_gev: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct FluxArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub trap: TrapArgs,
    #[arg(long, value_parser = serde_value::<ImpulseConvention>)]
    pub impulse_convention: Option<ImpulseConvention>,
    #[arg(long)]
    pub e_lo_ev: Option<f64>,
    #[arg(long)]
    pub e_hi_ev: Option<f64>,
    #[arg(long)]
    pub e_n: Option<usize>,
    /// Incoming species.
    #[arg(long)]
    pub projectile: Option<String>,
    /// Target rate of above-threshold kicks, events/day.
    #[arg(long)]
    pub rate_per_day: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TofArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub trap: TrapArgs,
    #[arg(long)]
    pub projectile: Option<String>,
    #[arg(long)]
    pub baseline_mm: Option<f64>,
    /// Projectile kinetic energy, eV.
    #[arg(long)]
    pub energy_ev: Option<f64>,
    /// Wanted energy resolution, eV.
    #[arg(long)]
    pub de_ev: Option<f64>,
    /// Speed at which to quote the velocity resolution, km/s.
    #[arg(long)]
    pub v_kms: Option<f64>,
}

#[derive(Debug, Args)]
pub struct OdeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub trap: TrapArgs,
    /// Impact parameter, m; by default the fastest pass runs at 0.05c.
    #[arg(long)]
    pub b_m: Option<f64>,
    /// ωτ values to sweep, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub omega_taus: Option<Vec<f64>>,
    /// Run a single pass at this speed instead of the sweep, km/s.
    #[arg(long)]
    pub v_kms: Option<f64>,
    /// Monitored axis: x (along the track), y (toward closest approach), z.
    #[arg(long, value_parser = serde_value::<Axis>)]
    pub axis: Option<Axis>,
    #[arg(long)]
    pub rtol: Option<f64>,
    /// Projectile charge in units of e.
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub projectile_mass_gev: Option<f64>,
}

#[derive(Debug, Args)]
pub struct McArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub trap: TrapArgs,
    #[command(flatten)]
    pub conventions: ConventionArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub dist: DistArgs,
    #[command(flatten)]
    pub exposure: ExposureArgs,
    #[arg(long)]
    pub samples: Option<u64>,
    /// Fixed sampling radius, m; by default chosen per event.
    #[arg(long)]
    pub b_cut_m: Option<f64>,
    #[arg(long)]
    pub bins_per_decade: Option<u32>,
    #[arg(long)]
    pub decades: Option<u32>,
    /// Also bisect the sampled rate for the minimum charge.
    #[arg(long)]
    pub bisect: bool,
}

#[derive(Debug, Args)]
pub struct UnitsArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, requires_all = ["from", "to"])]
    pub value: Option<f64>,
    /// Source unit symbol, e.g. GeV/c^2.
    #[arg(long)]
    pub from: Option<String>,
    #[arg(long)]
    pub to: Option<String>,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn set_opt<T>(slot: &mut Option<T>, v: Option<T>) {
    if v.is_some() {
        *slot = v;
    }
}

impl CommonArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        set_opt(&mut cfg.output, self.output.clone());
        set(&mut cfg.format, self.format);
        set(&mut cfg.seed, self.seed);
    }
}

impl TrapArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        let t = &mut cfg.trap;
        set(&mut t.species, self.species.clone());
        if self.omega.is_some() {
            t.omega_rad_s = self.omega;
            t.freq_hz = None;
        }
        if self.freq_hz.is_some() {
            t.freq_hz = self.freq_hz;
            t.omega_rad_s = None;
        }
        set(&mut t.kind, self.trap_kind);
        set(&mut t.n_sensors, self.n_sensors);
    }
}

impl ConventionArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        let c = &mut cfg.conventions;
        set(&mut c.impulse, self.impulse_convention);
        set(&mut c.vmin_mode, self.vmin_mode);
        set(&mut c.acceptance, self.acceptance);
    }
}

impl ModelArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        let m = &mut cfg.model;
        set(&mut m.m_chi_gev, self.m_chi_gev);
        set(&mut m.q_chi, self.q);
        set(&mut m.f_q, self.f_q);
        set(&mut m.rho_dm_gev_cm3, self.rho_dm_gev_cm3);
    }
}

impl DistArgs {
    fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        let d = &mut cfg.distribution;
        let current = match d {
            DistributionBlock::Mb { .. } => DistKind::Mb,
            DistributionBlock::Halo { .. } => DistKind::Halo,
            DistributionBlock::Mono { .. } => DistKind::Mono,
        };
        match self.dist {
            Some(k) if k != current => {
                *d = match k {
                    DistKind::Mb => DistributionBlock::default(),
                    DistKind::Halo => DistributionBlock::halo_default(),
                    DistKind::Mono => DistributionBlock::Mono {
                        v_kms: self.v_kms.ok_or(Error::MissingParameter("--v-kms for a mono distribution"))?,
                        direction: None,
                    },
                }
            }
            _ => {}
        }
        let stray = |flag: &str, kind: &str| Error::Config(format!("{flag} applies to the {kind} distribution"));
        match d {
            DistributionBlock::Mb { t_k } => {
                set(t_k, self.temperature_k);
                if self.v0_kms.or(self.vesc_kms).or(self.vearth_kms).is_some() {
                    return Err(stray("--v0-kms/--vesc-kms/--vearth-kms", "halo"));
                }
                if self.v_kms.is_some() || self.direction.is_some() {
                    return Err(stray("--v-kms/--direction", "mono"));
                }
            }
            DistributionBlock::Halo {
                v0_kms,
                vesc_kms,
                vearth_kms,
            } => {
                set(v0_kms, self.v0_kms);
                set(vesc_kms, self.vesc_kms);
                set(vearth_kms, self.vearth_kms);
                if self.temperature_k.is_some() {
                    return Err(stray("--temperature-k", "mb"));
                }
                if self.v_kms.is_some() || self.direction.is_some() {
                    return Err(stray("--v-kms/--direction", "mono"));
                }
            }
            DistributionBlock::Mono { v_kms, direction } => {
                set(v_kms, self.v_kms);
                if let Some(dir) = &self.direction {
                    *direction = Some([dir[0], dir[1], dir[2]]);
                }
                if self.temperature_k.is_some() {
                    return Err(stray("--temperature-k", "mb"));
                }
                if self.v0_kms.or(self.vesc_kms).or(self.vearth_kms).is_some() {
                    return Err(stray("--v0-kms/--vesc-kms/--vearth-kms", "halo"));
                }
            }
        }
        Ok(())
    }
}

impl ExposureArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        set(&mut cfg.exposure.t_obs_days, self.t_obs_days);
        set(&mut cfg.exposure.n_required, self.n_required);
    }
}

impl Command {
    fn common(&self) -> &CommonArgs {
        match self {
            Command::Threshold(a) => &a.common,
            Command::Xsec(a) => &a.common,
            Command::Rate(a) => &a.common,
            Command::Sensitivity(a) => &a.common,
            Command::Flux(a) => &a.common,
            Command::Tof(a) => &a.common,
            Command::Validate(ValidateCommand::Ode(a)) => &a.common,
            Command::Validate(ValidateCommand::Mc(a)) => &a.common,
            Command::Units(a) => &a.common,
        }
    }

    pub fn path(&self) -> Vec<&'static str> {
        match self {
            Command::Threshold(_) => vec!["threshold"],
            Command::Xsec(_) => vec!["xsec"],
            Command::Rate(_) => vec!["rate"],
            Command::Sensitivity(_) => vec!["sensitivity"],
            Command::Flux(_) => vec!["flux"],
            Command::Tof(_) => vec!["tof"],
            Command::Validate(ValidateCommand::Ode(_)) => vec!["validate", "ode"],
            Command::Validate(ValidateCommand::Mc(_)) => vec!["validate", "mc"],
            Command::Units(_) => vec!["units"],
        }
    }

    /// Merge flags into `cfg`.
    pub fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        self.common().apply(cfg);
        let p = &mut cfg.point;
        match self {
            Command::Threshold(a) => {
                a.trap.apply(cfg);
                set_opt(&mut cfg.point.dp_evc, a.dp_evc);
                set_opt(&mut cfg.trap.heating_rate_per_s, a.heating_rate);
                set_opt(&mut cfg.trap.electrode_distance_um, a.electrode_distance_um);
                set_opt(&mut cfg.point.new_distance_um, a.new_distance_um);
                set_opt(&mut cfg.point.new_species, a.new_species.clone());
            }
            Command::Xsec(a) => {
                set_opt(&mut p.v_m_s, a.v_over_c.map(|b| b * C));
                set_opt(&mut p.v_m_s, a.v_kms.map(|v| v * 1e3));
                set_opt(&mut p.b_nm, a.b_nm);
                set_opt(&mut p.dp_evc, a.dp_evc);
                a.trap.apply(cfg);
                a.conventions.apply(cfg);
                set(&mut cfg.model.q_chi, a.q);
                set(&mut cfg.model.m_chi_gev, a.m_chi_gev);
            }
            Command::Rate(a) => {
                set_opt(&mut p.dp_evc, a.dp_evc);
                set_opt(&mut p.vmin_kms, a.vmin_kms);
                set_opt(&mut p.draw, a.draw);
                if let (Some(lo), Some(hi), Some(n)) = (a.dp_lo_evc, a.dp_hi_evc, a.dp_n) {
                    cfg.dp_grid = Some(Grid::range(lo, hi, n));
                }
                a.trap.apply(cfg);
                a.conventions.apply(cfg);
                a.model.apply(cfg);
                a.dist.apply(cfg)?;
                a.exposure.apply(cfg);
            }
            Command::Sensitivity(a) => {
                a.trap.apply(cfg);
                a.conventions.apply(cfg);
                a.model.apply(cfg);
                a.dist.apply(cfg)?;
                a.exposure.apply(cfg);
                let g = &mut cfg.mass_grid;
                if let Some(v) = &a.masses_gev {
                    g.values = Some(v.clone());
                }
                if a.m_lo_gev.or(a.m_hi_gev).is_some() || a.m_n.is_some() {
                    g.values = None;
                }
                set(&mut g.lo, a.m_lo_gev);
                set(&mut g.hi, a.m_hi_gev);
                set(&mut g.n, a.m_n);
            }
            Command::Flux(a) => {
                a.trap.apply(cfg);
                set(&mut cfg.conventions.impulse, a.impulse_convention);
                let g = &mut cfg.energy_grid;
                if a.e_lo_ev.or(a.e_hi_ev).is_some() || a.e_n.is_some() {
                    g.values = None;
                }
                set(&mut g.lo, a.e_lo_ev);
                set(&mut g.hi, a.e_hi_ev);
                set(&mut g.n, a.e_n);
                set(&mut cfg.flux.projectile, a.projectile.clone());
                set(&mut cfg.flux.rate_per_day, a.rate_per_day);
            }
            Command::Tof(a) => {
                a.trap.apply(cfg);
                let t = &mut cfg.tof;
                set(&mut t.projectile, a.projectile.clone());
                set(&mut t.baseline_mm, a.baseline_mm);
                set(&mut t.energy_ev, a.energy_ev);
                set(&mut t.de_ev, a.de_ev);
                set_opt(&mut t.v_kms, a.v_kms);
            }
            Command::Validate(ValidateCommand::Ode(a)) => {
                a.trap.apply(cfg);
                let o = &mut cfg.ode;
                set_opt(&mut o.b_m, a.b_m);
                set(&mut o.omega_taus, a.omega_taus.clone());
                set_opt(&mut o.v_kms, a.v_kms);
                set(&mut o.axis, a.axis);
                set(&mut o.rtol, a.rtol);
                set(&mut o.projectile_q, a.q);
                set(&mut o.projectile_mass_gev, a.projectile_mass_gev);
            }
            Command::Validate(ValidateCommand::Mc(a)) => {
                a.trap.apply(cfg);
                a.conventions.apply(cfg);
                a.model.apply(cfg);
                a.dist.apply(cfg)?;
                a.exposure.apply(cfg);
                let m = &mut cfg.mc;
                set(&mut m.n_samples, a.samples);
                set_opt(&mut m.b_cut_m, a.b_cut_m);
                set(&mut m.bins_per_decade, a.bins_per_decade);
                set(&mut m.decades, a.decades);
                m.bisect |= a.bisect;
            }
            Command::Units(a) => {
                if let (Some(value), Some(from), Some(to)) = (a.value, &a.from, &a.to) {
                    p.convert = Some(ConvertSpec {
                        value,
                        from: from.clone(),
                        to: to.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Defaults, then `--config`, then flags; validated.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.common().config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        self.apply(&mut cfg)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Key/value lines for stdout; also written as a `quantity,value,unit`
/// table when an output file is requested.
struct Report(Table);

impl Report {
    fn new() -> Self {
        Report(Table::new(&[("quantity", ""), ("value", ""), ("unit", "")]))
    }

    fn num(&mut self, key: &str, value: f64, unit: &str) {
        self.0
            .push(vec![Cell::Text(key.into()), Cell::Num(value), Cell::Text(unit.into())]);
    }

    fn text(&mut self, key: &str, value: impl ToString) {
        self.0
            .push(vec![Cell::Text(key.into()), Cell::Text(value.to_string()), Cell::Text(String::new())]);
    }

    fn lines(&self) -> Vec<String> {
        self.0
            .rows
            .iter()
            .map(|r| match (&r[0], &r[1], &r[2]) {
                (Cell::Text(k), Cell::Num(v), Cell::Text(u)) if u.is_empty() => format!("{k} = {v:.6e}"),
                (Cell::Text(k), Cell::Num(v), Cell::Text(u)) => format!("{k} = {v:.6e} {u}"),
                (Cell::Text(k), Cell::Text(v), _) => format!("{k} = {v}"),
                _ => unreachable!("report rows are key, value, unit"),
            })
            .collect()
    }
}

/// What a command produced. A curve is always written to a file; a report
/// only when `--output` is given.
pub struct Outcome {
    pub stdout: Vec<String>,
    pub table: Table,
    pub stem: &'static str,
    pub always_write: bool,
}

fn report(r: Report, stem: &'static str) -> Outcome {
    Outcome {
        stdout: r.lines(),
        table: r.0,
        stem,
        always_write: false,
    }
}

fn curve(table: Table, stdout: Vec<String>, stem: &'static str) -> Outcome {
    Outcome {
        stdout,
        table,
        stem,
        always_write: true,
    }
}

fn options_meta(t: &mut Table, o: RateOptions) {
    t.meta("impulse_convention", o.impulse.name());
    t.meta("vmin_mode", o.vmin_mode.name());
    t.meta("acceptance", o.apply_acceptance);
}

fn run_threshold(cfg: &RunConfig) -> Result<Outcome> {
    let trap = cfg.trap()?;
    let th = sql_threshold(&trap);
    let mut r = Report::new();
    r.text("species", trap.species().label());
    r.num("omega", trap.omega_si(), "rad/s");
    r.num("dp_sql", th.dp_sql.value_in(Unit::EV_MOMENTUM)?, "eV/c");
    r.num("energy_threshold", th.energy_threshold.value_in(Unit::UEV)?, "ueV");
    r.num("ground_state_size", th.ground_state_size.value_in(Unit::NM)?, "nm");
    r.num("period", trap.period().value_in(Unit::NS)?, "ns");
    if let Some(dp) = cfg.point.dp_evc {
        let e = energy_deposit(Quantity::new(dp, Unit::EV_MOMENTUM), trap.species())?;
        r.num("energy_deposit", e.value_in(Unit::EV)?, "eV");
    }
    if trap.heating_rate().is_some() {
        r.num("duty_cycle_max", duty_cycle_max(&trap)?.value_in(Unit::S)?, "s");
        r.num("quality_factor", trap.quality_factor()?, "");
    }
    if let Some(d) = cfg.point.new_distance_um {
        let species = match &cfg.point.new_species {
            Some(s) => species_by_name(s)?,
            None => trap.species().clone(),
        };
        let g = scale_heating_rate(&trap, Quantity::new(d, Unit::UM), &species)?;
        r.num("scaled_heating_rate", g.value_in(Unit::PER_S)?, "1/s");
    }
    Ok(report(r, "threshold"))
}

fn run_xsec(cfg: &RunConfig) -> Result<Outcome> {
    let trap = cfg.trap()?;
    let conv = cfg.conventions.impulse;
    let q = cfg.model.q_chi;
    let v_si = cfg
        .point
        .v_m_s
        .ok_or(Error::MissingParameter("speed (--v-over-c or --v-kms)"))?;
    let v = Quantity::new(v_si, Unit::M_PER_S);
    let sigma = effective_cross_section(&trap, q, v, conv)?;
    let dp_th = sql_threshold(&trap).dp_sql;
    let mut r = Report::new();
    r.text("impulse_convention", conv.name());
    r.num("v_over_c", v_si / C, "");
    r.num("sigma_eff", sigma.value_in(Unit::NM2)?, "nm^2");
    r.num("sigma_eff_cm2", sigma.value_in(Unit::CM2)?, "cm^2");
    r.num("dp_th", dp_th.value_in(Unit::EV_MOMENTUM)?, "eV/c");
    let projectile = crate::species::ParticleSpecies::new("chi", Quantity::new(cfg.model.m_chi_gev, Unit::GEV_MASS), q)?;
    if let Some(b) = cfg.point.b_nm {
        let e = FlybyEvent::new(Quantity::new(b, Unit::NM), v, projectile.clone(), trap.species().clone())?;
        r.num("impulse", impulse(&e, conv).value_in(Unit::EV_MOMENTUM)?, "eV/c");
        r.num("flyby_time", flyby_time(&e).value_in(Unit::NS)?, "ns");
        let chk = impulsive_ok(&e, &trap);
        r.num("omega_tau", chk.margin, "");
        r.text("impulsive", chk.ok);
    }
    if let Some(dp) = cfg.point.dp_evc {
        let dp = Quantity::new(dp, Unit::EV_MOMENTUM);
        let mode = cfg.conventions.vmin_mode;
        r.text("vmin_mode", mode.name());
        r.num("v_min", v_min(dp, trap.species(), mode, &projectile)?.value_in(Unit::KM_PER_S)?, "km/s");
        r.num("acceptance", acceptance(dp, dp_th)?, "");
    }
    Ok(report(r, "xsec"))
}

fn run_rate(cfg: &RunConfig) -> Result<Outcome> {
    let trap = cfg.trap()?;
    let model = cfg.model()?;
    let opts = cfg.options();
    if let Some(n) = cfg.point.draw {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut t = Table::new(&[("vx", "m/s"), ("vy", "m/s"), ("vz", "m/s")]);
        t.meta("distribution", serde_json::to_string(model.dist()).expect("plain data"));
        t.meta("seed", cfg.seed);
        for _ in 0..n {
            let v = model.dist().sample(&mut rng);
            t.push(v.iter().map(|x| Cell::Num(*x)).collect());
        }
        return Ok(curve(t, vec![format!("drew {n} velocities")], "velocities"));
    }
    if let Some(g) = &cfg.dp_grid {
        let mut t = Table::new(&[("dp_eVc", "eV/c"), ("rate_density", "1/s/(eV/c)")]);
        t.meta("distribution", serde_json::to_string(model.dist()).expect("plain data"));
        t.meta("m_chi_GeV", format!("{:e}", cfg.model.m_chi_gev));
        t.meta("q_chi", format!("{:e}", cfg.model.q_chi));
        t.meta("omega_rad_s", format!("{:e}", trap.omega_si()));
        t.meta("n_sensors", 1);
        options_meta(&mut t, opts);
        let single = trap.clone().with_sensors(1)?;
        for dp in g.points("dp grid")? {
            let d = differential_rate(&model, &single, Quantity::new(dp, Unit::EV_MOMENTUM), opts)?;
            t.push(vec![Cell::Num(dp), Cell::Num(d.si() * Unit::EV_MOMENTUM.scale)]);
        }
        let line = format!("{} kicks", t.rows.len());
        return Ok(curve(t, vec![line], "spectrum"));
    }
    let res = integrated_rate(&model, &trap, opts)?;
    let mut r = Report::new();
    r.text("distribution", model.dist().name());
    r.num("number_density", number_density(&model).value_in(Unit::PER_CM3)?, "1/cm^3");
    r.num("mean_inverse_speed", model.dist().mean_inverse_speed()?.value_in(Unit::S_PER_M)?, "s/m");
    r.num("dp_th", res.dp_th.value_in(Unit::EV_MOMENTUM)?, "eV/c");
    r.num("rate", res.rate.value_in(Unit::PER_S)?, "1/s");
    r.num("rate_per_day", res.rate.value_in(Unit::PER_DAY)?, "1/day");
    r.num("ln_rate_per_s", res.ln_rate, "");
    r.num("rel_err", res.rel_err, "");
    let exposure = cfg.exposure()?;
    r.num("expected_events", (res.rate * exposure.t_obs()).si(), "");
    if let Some(dp) = cfg.point.dp_evc {
        let d = differential_rate(&model, &trap, Quantity::new(dp, Unit::EV_MOMENTUM), opts)?;
        // per (eV/c) rather than per (kg m/s)
        r.num("differential_rate", d.si() * Unit::EV_MOMENTUM.scale, "1/s/(eV/c)");
    }
    if let Some(vm) = cfg.point.vmin_kms {
        let eta = model.dist().eta(Quantity::new(vm, Unit::KM_PER_S))?;
        r.num("eta", eta.value_in(Unit::S_PER_M)?, "s/m");
    }
    Ok(report(r, "rate"))
}

fn run_sensitivity(cfg: &RunConfig) -> Result<Outcome> {
    let trap = cfg.trap()?;
    let grid = cfg.mass_grid.points("mass grid")?;
    let c = sensitivity_curve(&grid, &cfg.model()?, &trap, &cfg.exposure()?, cfg.options())?;
    let dead = c.points.iter().filter(|p| p.q_min.is_none()).count();
    let line = format!("{} masses, {} without sensitivity", c.points.len(), dead);
    Ok(curve(Table::from(&c), vec![line], "sensitivity"))
}

fn run_flux(cfg: &RunConfig) -> Result<Outcome> {
    let trap = cfg.trap()?;
    let grid = cfg.energy_grid.points("energy grid")?;
    let projectile = species_by_name(&cfg.flux.projectile)?;
    let target = Quantity::new(cfg.flux.rate_per_day, Unit::PER_DAY);
    let c = flux_curve(&grid, &trap, &projectile, target, cfg.conventions.impulse)?;
    let line = format!("{} energies", c.points.len());
    Ok(curve(Table::from(&c), vec![line], "flux"))
}

fn run_tof(cfg: &RunConfig) -> Result<Outcome> {
    let trap = cfg.trap()?;
    let t = &cfg.tof;
    let projectile = species_by_name(&t.projectile)?;
    let e = Quantity::new(t.energy_ev, Unit::EV);
    let b = required_baseline(e, Quantity::new(t.de_ev, Unit::EV), &trap, &projectile)?;
    let setup = TofSetup::new(trap.clone(), Quantity::new(t.baseline_mm, Unit::MM), projectile.clone())?;
    let v = match t.v_kms {
        Some(v) => Quantity::new(v, Unit::KM_PER_S),
        None => Quantity::new((2.0 * e.si() / projectile.mass_kg()).sqrt(), Unit::M_PER_S),
    };
    let mut r = Report::new();
    r.num("timing_resolution", timing_resolution(&trap).value_in(Unit::NS)?, "ns");
    r.num("required_baseline", b.length.value_in(Unit::MM)?, "mm");
    r.text("relativistic_warning", b.relativistic_warning);
    r.num("energy_resolution", energy_resolution(&setup, e)?.value_in(Unit::EV)?, "eV");
    r.num("speed", v.value_in(Unit::KM_PER_S)?, "km/s");
    r.num("velocity_resolution", velocity_resolution(&setup, v)?.value_in(Unit::KM_PER_S)?, "km/s");
    Ok(report(r, "tof"))
}

fn run_ode(cfg: &RunConfig) -> Result<Outcome> {
    let trap = cfg.trap()?;
    let o = &cfg.ode;
    let projectile = o.projectile()?;
    let b = o.impact_parameter(&trap);
    if let Some(v) = o.v_kms {
        let s = OdeScenario::new(&trap, projectile, b, Quantity::new(v, Unit::KM_PER_S))?
            .with_axis(o.axis)
            .with_tolerance(o.rtol)?;
        let out = ode_flyby(&s)?;
        let mut r = Report::new();
        r.num("omega_tau", out.omega_tau, "");
        r.num("ratio", out.ratio, "");
        r.num("dp_mode", out.dp_mode.value_in(Unit::EV_MOMENTUM)?, "eV/c");
        r.num("de_mode", out.de_mode.value_in(Unit::EV)?, "eV");
        r.num("recoil", out.recoil, "");
        for (k, j) in ["x", "y", "z"].iter().zip(out.coulomb_impulse) {
            r.num(&format!("coulomb_impulse_{k}"), j, "2λ/(bv)");
        }
        r.num("energy_residual", out.energy_residual, "");
        r.num("steps", out.steps as f64, "");
        return Ok(report(r, "ode"));
    }
    let rows = validate_impulse_regime(&trap, &projectile, b, &o.omega_taus, o.axis, o.rtol)?;
    let mut t = regime_table(&rows);
    t.meta("omega_rad_s", format!("{:e}", trap.omega_si()));
    t.meta("target", trap.species().label());
    t.meta("b_m", format!("{:e}", b.si()));
    t.meta("axis", serde_json::to_string(&o.axis).expect("plain data").trim_matches('"'));
    t.meta("rtol", format!("{:e}", o.rtol));
    t.meta("projectile_q", format!("{:e}", o.projectile_q));
    t.meta("projectile_mass_GeV", format!("{:e}", o.projectile_mass_gev));
    let lines = rows.iter().map(|r| format!("{:.3e} {:.9}", r.omega_tau, r.ratio)).collect();
    Ok(curve(t, lines, "impulse_regime"))
}

fn run_mc(cfg: &RunConfig) -> Result<Outcome> {
    let trap = cfg.trap()?;
    let model = cfg.model()?;
    let opts = cfg.options();
    let m = &cfg.mc;
    let run = McRun::new(model.clone(), trap.clone(), m.n_samples, cfg.seed)?
        .with_b_cut(m.b_cut())?
        .with_options(opts)
        .with_binning(m.bins_per_decade, m.decades)?;
    let s = mc_spectrum(&run)?;
    let mut t = spectrum_table(&s);
    t.meta("distribution", serde_json::to_string(model.dist()).expect("plain data"));
    t.meta("m_chi_GeV", format!("{:e}", cfg.model.m_chi_gev));
    t.meta("q_chi", format!("{:e}", cfg.model.q_chi));
    t.meta("omega_rad_s", format!("{:e}", trap.omega_si()));
    options_meta(&mut t, opts);
    let bare = RateOptions {
        apply_acceptance: false,
        ..opts
    };
    let analytic = integrated_rate(&model, &trap, bare)?.rate.si() / trap.n_sensors() as f64;
    let pull = (s.rate_above - analytic) / s.rate_above_err;
    let mut lines = vec![
        format!("rate_above = {:.6e} ± {:.2e} 1/s (per sensor)", s.rate_above, s.rate_above_err),
        format!("analytic   = {analytic:.6e} 1/s (pull {pull:+.2})"),
        format!(
            "acceptance axial = {:.4}, formula = {:.4}",
            s.empirical_acceptance(),
            s.formula_acceptance()
        ),
    ];
    if m.bisect {
        let exposure = cfg.exposure()?;
        let q_mc = mc_min_charge(&run, &exposure)?;
        let q_an = min_charge(&model, &trap, &exposure, opts)?;
        t.meta("q_min_mc", format!("{q_mc:e}"));
        t.meta("q_min_analytic", format!("{q_an:e}"));
        lines.push(format!("q_min mc = {q_mc:.6e}, analytic = {q_an:.6e}"));
    }
    Ok(curve(t, lines, "mc_spectrum"))
}

fn run_units(cfg: &RunConfig) -> Result<Outcome> {
    let mut r = Report::new();
    match &cfg.point.convert {
        Some(c) => {
            let q = Quantity::new(c.value, Unit::parse(&c.from)?);
            let m = q.convert(Unit::parse(&c.to)?)?;
            r.num("value", m.value, m.unit.symbol);
        }
        None => {
            for s in builtin_species() {
                r.num(&format!("{}.mass", s.label()), s.mass_kg(), "kg");
                r.num(&format!("{}.charge", s.label()), s.charge_e(), "e");
            }
        }
    }
    Ok(report(r, "units"))
}

pub fn execute(cmd: &Command, cfg: &RunConfig) -> Result<Outcome> {
    match cmd {
        Command::Threshold(_) => run_threshold(cfg),
        Command::Xsec(_) => run_xsec(cfg),
        Command::Rate(_) => run_rate(cfg),
        Command::Sensitivity(_) => run_sensitivity(cfg),
        Command::Flux(_) => run_flux(cfg),
        Command::Tof(_) => run_tof(cfg),
        Command::Validate(ValidateCommand::Ode(_)) => run_ode(cfg),
        Command::Validate(ValidateCommand::Mc(_)) => run_mc(cfg),
        Command::Units(_) => run_units(cfg),
    }
}

/// Resolve, compute, then write the output file and its manifest.
pub fn run(cli: &Cli) -> Result<()> {
    let clock = RunClock::start();
    let cfg = cli.command.resolve()?;
    let mut out = execute(&cli.command, &cfg)?;
    if out.always_write || cfg.output.is_some() {
        let path = resolve_output_path(cfg.output.as_deref(), out.stem, cfg.format);
        emit_curve(&out.table, &path, cfg.format)?;
        let manifest = clock.manifest(&cli.command.path(), cfg.to_json(), cfg.seed, &path);
        write_manifest(&path, &manifest)?;
        out.stdout.push(format!("wrote {}", path.display()));
    }
    if !out.stdout.is_empty() {
        say(&out.stdout.join("\n"));
    }
    Ok(())
}

// A closed reader (`| head`) is not a failure of the run.
fn say(text: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_numeric() {
        2
    } else {
        1
    }
}

pub fn error_json(kind: &str, message: &str) -> String {
    json!({ "error": { "kind": kind, "message": message } }).to_string()
}

/// Parse `args` and run, returning the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                say(e.to_string().trim_end());
                return 0;
            }
            eprintln!("{}", error_json("usage", e.to_string().trim_end()));
            return 1;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", error_json(e.kind(), &e.to_string()));
            exit_code(&e)
        }
    }
}
