//! Projectile velocity distributions in the lab (Earth) frame and the
//! mean-inverse-speed integral
//!
//! ```text
//! η(v_min) = ∫_{|v| > v_min} f(v) / |v| d³v
//! ```
//!
//! that carries all velocity dependence of the Rutherford rate.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::constants::{C, K_B};
use crate::error::{Error, Result};
use crate::quad::{integrate, integrate_to_infinity, QuadOptions};
use crate::units::{Dim, Quantity, Unit};

/// Relative tolerance of every η quadrature.
pub const ETA_REL_TOL: f64 = 1e-8;

pub const HALO_V0_KMS: f64 = 220.0;
pub const HALO_VESC_KMS: f64 = 544.0;
pub const HALO_VEARTH_KMS: f64 = 232.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Isotropic,
    Fixed([f64; 3]),
}

/// All speeds are stored in m/s, temperatures in K, masses in kg.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum VelocityDistribution {
    /// Thermal gas at rest in the lab.
    MaxwellBoltzmann { temperature_k: f64, mass_kg: f64 },
    /// Truncated isotropic Maxwellian in the galactic frame, seen from a
    /// detector moving at `v_earth` along +ẑ.
    StandardHalo { v0: f64, v_esc: f64, v_earth: f64 },
    Monochromatic { v: f64, direction: Direction },
}

fn speed_si(name: &'static str, v: Quantity) -> Result<f64> {
    let s = v.si_as(Dim::VELOCITY)?;
    if !(s > 0.0 && s < C) {
        return Err(Error::invalid(name, format!("must lie in (0, c), got {s} m/s")));
    }
    Ok(s)
}

impl VelocityDistribution {
    pub fn maxwell_boltzmann(temperature_k: f64, mass: Quantity) -> Result<Self> {
        if !(temperature_k > 0.0 && temperature_k.is_finite()) {
            return Err(Error::invalid("temperature", format!("must be positive, got {temperature_k} K")));
        }
        let m = mass.si_as(Dim::MASS)?;
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::invalid("mass", format!("must be positive, got {m} kg")));
        }
        let d = VelocityDistribution::MaxwellBoltzmann {
            temperature_k,
            mass_kg: m,
        };
        if d.characteristic_speed() >= C {
            return Err(Error::invalid("temperature", "thermal speed reaches c"));
        }
        Ok(d)
    }

    pub fn standard_halo(v0: Quantity, v_esc: Quantity, v_earth: Quantity) -> Result<Self> {
        Ok(VelocityDistribution::StandardHalo {
            v0: speed_si("v0", v0)?,
            v_esc: speed_si("v_esc", v_esc)?,
            v_earth: speed_si("v_earth", v_earth)?,
        })
    }

    /// v0 = 220 km/s, v_esc = 544 km/s, v_earth = 232 km/s.
    pub fn standard_halo_default() -> Self {
        VelocityDistribution::StandardHalo {
            v0: HALO_V0_KMS * 1e3,
            v_esc: HALO_VESC_KMS * 1e3,
            v_earth: HALO_VEARTH_KMS * 1e3,
        }
    }

    pub fn monochromatic(v: Quantity, direction: Direction) -> Result<Self> {
        let s = speed_si("speed", v)?;
        if let Direction::Fixed(n) = direction {
            let norm = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
            if !(norm > 0.0 && norm.is_finite()) {
                return Err(Error::invalid("direction", "must be a nonzero finite vector"));
            }
            return Ok(VelocityDistribution::Monochromatic {
                v: s,
                direction: Direction::Fixed([n[0] / norm, n[1] / norm, n[2] / norm]),
            });
        }
        Ok(VelocityDistribution::Monochromatic { v: s, direction })
    }

    pub fn name(&self) -> &'static str {
        match self {
            VelocityDistribution::MaxwellBoltzmann { .. } => "mb",
            VelocityDistribution::StandardHalo { .. } => "halo",
            VelocityDistribution::Monochromatic { .. } => "mono",
        }
    }

    /// The same family re-evaluated for a projectile of mass `mass_kg`. Only
    /// the thermal distribution depends on the projectile mass.
    pub fn reparameterized(&self, mass_kg: f64) -> Self {
        match *self {
            VelocityDistribution::MaxwellBoltzmann { temperature_k, .. } => VelocityDistribution::MaxwellBoltzmann {
                temperature_k,
                mass_kg,
            },
            other => other,
        }
    }

    /// Most probable speed for MB (`sqrt(2kT/m)`), v0 for the halo, v for a beam.
    pub fn characteristic_speed(&self) -> f64 {
        match *self {
            VelocityDistribution::MaxwellBoltzmann { temperature_k, mass_kg } => {
                (2.0 * K_B * temperature_k / mass_kg).sqrt()
            }
            VelocityDistribution::StandardHalo { v0, .. } => v0,
            VelocityDistribution::Monochromatic { v, .. } => v,
        }
    }

    /// Upper end of the lab-frame speed support, `None` for an unbounded tail.
    pub fn max_speed_si(&self) -> Option<f64> {
        match *self {
            VelocityDistribution::MaxwellBoltzmann { .. } => None,
            VelocityDistribution::StandardHalo { v_esc, v_earth, .. } => Some(v_esc + v_earth),
            VelocityDistribution::Monochromatic { v, .. } => Some(v),
        }
    }

    pub fn earth_velocity(&self) -> [f64; 3] {
        match *self {
            VelocityDistribution::StandardHalo { v_earth, .. } => [0.0, 0.0, v_earth],
            _ => [0.0; 3],
        }
    }

    pub fn eta(&self, v_min: Quantity) -> Result<Quantity> {
        let vm = v_min.si_as(Dim::VELOCITY)?;
        Ok(Quantity::new(self.eta_si(vm)?, Unit::S_PER_M))
    }

    pub fn mean_inverse_speed(&self) -> Result<Quantity> {
        self.eta(Quantity::new(0.0, Unit::M_PER_S))
    }

    /// η in s/m for `v_min` in m/s.
    pub fn eta_si(&self, v_min: f64) -> Result<f64> {
        check_vmin(v_min)?;
        match *self {
            VelocityDistribution::MaxwellBoltzmann { .. } => Ok(self.ln_eta_si(v_min)?.exp()),
            VelocityDistribution::StandardHalo { v0, v_esc, v_earth } => halo_eta(v0, v_esc, v_earth, v_min),
            VelocityDistribution::Monochromatic { v, .. } => Ok(if v > v_min { 1.0 / v } else { 0.0 }),
        }
    }

    /// `ln η`; stays finite for thermal tails far below the f64 range of η
    /// itself and is `-inf` outside kinematic support.
    pub fn ln_eta_si(&self, v_min: f64) -> Result<f64> {
        check_vmin(v_min)?;
        match *self {
            VelocityDistribution::MaxwellBoltzmann { temperature_k, mass_kg } => {
                let kt = K_B * temperature_k;
                Ok(0.5 * (2.0 * mass_kg / (PI * kt)).ln() - mass_kg * v_min * v_min / (2.0 * kt))
            }
            _ => Ok(self.eta_si(v_min)?.ln()),
        }
    }

    /// Lab-frame speed density g(v) with ∫g dv = 1. A beam has no density;
    /// it returns 0 everywhere.
    pub fn pdf_speed(&self, v: f64) -> f64 {
        if v <= 0.0 {
            return 0.0;
        }
        match *self {
            VelocityDistribution::MaxwellBoltzmann { temperature_k, mass_kg } => {
                let a = mass_kg / (2.0 * K_B * temperature_k);
                4.0 * PI * v * v * (a / PI).powf(1.5) * (-a * v * v).exp()
            }
            VelocityDistribution::StandardHalo { v0, v_esc, v_earth } => {
                v * halo_angular_bracket(v0, v_esc, v_earth, v) * PI * v0 * v0 / (v_earth * halo_norm_inv(v0, v_esc))
            }
            VelocityDistribution::Monochromatic { .. } => 0.0,
        }
    }

    /// One lab-frame velocity vector (m/s).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; 3] {
        match *self {
            VelocityDistribution::MaxwellBoltzmann { temperature_k, mass_kg } => {
                let s = (K_B * temperature_k / mass_kg).sqrt();
                [0; 3].map(|_| s * rng.sample::<f64, _>(StandardNormal))
            }
            VelocityDistribution::StandardHalo { v0, v_esc, v_earth } => {
                let s = v0 / std::f64::consts::SQRT_2;
                loop {
                    let u = [0; 3].map(|_| s * rng.sample::<f64, _>(StandardNormal));
                    if u[0] * u[0] + u[1] * u[1] + u[2] * u[2] < v_esc * v_esc {
                        return [u[0], u[1], u[2] - v_earth];
                    }
                }
            }
            VelocityDistribution::Monochromatic { v, direction } => match direction {
                Direction::Fixed(n) => [v * n[0], v * n[1], v * n[2]],
                Direction::Isotropic => {
                    let n = isotropic_unit(rng);
                    [v * n[0], v * n[1], v * n[2]]
                }
            },
        }
    }
}

fn check_vmin(v_min: f64) -> Result<()> {
    if !(v_min >= 0.0) {
        return Err(Error::invalid("v_min", format!("must be non-negative, got {v_min}")));
    }
    Ok(())
}

pub(crate) fn isotropic_unit<R: Rng + ?Sized>(rng: &mut R) -> [f64; 3] {
    let cos_t: f64 = 2.0 * rng.random::<f64>() - 1.0;
    let phi = 2.0 * PI * rng.random::<f64>();
    let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
    [sin_t * phi.cos(), sin_t * phi.sin(), cos_t]
}

/// 1/N for the galactic truncated Maxwellian `N·exp(−u²/v0²)`, |u| < v_esc.
fn halo_norm_inv(v0: f64, v_esc: f64) -> f64 {
    let z = v_esc / v0;
    PI.powf(1.5) * v0.powi(3) * (libm::erf(z) - 2.0 * z * (-z * z).exp() / PI.sqrt())
}

/// Angle-integrated galactic Maxwellian at lab speed v, up to the factor
/// `π·N·v0²·v/v_earth`.
fn halo_angular_bracket(v0: f64, v_esc: f64, v_earth: f64, v: f64) -> f64 {
    let c_star = (v_esc * v_esc - v * v - v_earth * v_earth) / (2.0 * v * v_earth);
    if c_star <= -1.0 {
        return 0.0;
    }
    let c_star = c_star.min(1.0);
    let lo = (-(v - v_earth).powi(2) / (v0 * v0)).exp();
    let hi = (-(v * v + v_earth * v_earth + 2.0 * v * v_earth * c_star) / (v0 * v0)).exp();
    (lo - hi).max(0.0)
}

fn halo_eta(v0: f64, v_esc: f64, v_earth: f64, v_min: f64) -> Result<f64> {
    let top = v_esc + v_earth;
    if v_min >= top {
        return Ok(0.0);
    }
    let kink = (v_esc - v_earth).abs();
    let opts = QuadOptions::rel(ETA_REL_TOL);
    let f = |v: f64| halo_angular_bracket(v0, v_esc, v_earth, v);
    let mut total = 0.0;
    if v_min < kink {
        total += integrate(f, v_min, kink, opts)?.value;
        total += integrate(f, kink, top, opts)?.value;
    } else {
        total += integrate(f, v_min, top, opts)?.value;
    }
    Ok(PI * v0 * v0 / (v_earth * halo_norm_inv(v0, v_esc)) * total)
}

/// ∫ g(v) dv over the full support, by quadrature.
pub fn speed_normalization(dist: &VelocityDistribution) -> Result<f64> {
    let opts = QuadOptions::rel(1e-12);
    match *dist {
        VelocityDistribution::MaxwellBoltzmann { .. } => {
            let s = dist.characteristic_speed();
            Ok(integrate_to_infinity(|x| s * dist.pdf_speed(s * x), 0.0, opts)?.value)
        }
        VelocityDistribution::StandardHalo { v_esc, v_earth, .. } => {
            let kink = (v_esc - v_earth).abs();
            let f = |v| dist.pdf_speed(v);
            Ok(integrate(f, 0.0, kink, opts)?.value + integrate(f, kink, v_esc + v_earth, opts)?.value)
        }
        VelocityDistribution::Monochromatic { .. } => Ok(1.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::M_PROTON;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gev(m: f64) -> Quantity {
        Quantity::new(m, Unit::GEV_MASS)
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    /// η by direct quadrature of 4π v f(v) over v > v_min.
    fn mb_eta_by_quadrature(t: f64, m: f64, v_min: f64) -> f64 {
        let a = m / (2.0 * K_B * t);
        let norm = (a / PI).powf(1.5);
        let s = (1.0 / a).sqrt();
        let x0 = v_min / s;
        // shift so the integrand peaks near the lower limit in the tail
        let f = |x: f64| {
            let v = s * x;
            4.0 * PI * v * norm * (-(x * x - x0 * x0)).exp() * s
        };
        integrate_to_infinity(f, x0, QuadOptions::rel(1e-12)).unwrap().value * (-x0 * x0).exp()
    }

    /// Piecewise closed form for the standard halo.
    fn halo_eta_closed_form(v0: f64, v_esc: f64, v_earth: f64, v_min: f64) -> f64 {
        let (x, y, z) = (v_min / v0, v_earth / v0, v_esc / v0);
        let n_esc = libm::erf(z) - 2.0 * z * (-z * z).exp() / PI.sqrt();
        let sp = PI.sqrt();
        if x < z - y {
            (libm::erf(x + y) - libm::erf(x - y) - 4.0 * y * (-z * z).exp() / sp) / (2.0 * n_esc * v0 * y)
        } else if x < z + y {
            (libm::erf(z) - libm::erf(x - y) - 2.0 * (z + y - x) * (-z * z).exp() / sp) / (2.0 * n_esc * v0 * y)
        } else {
            0.0
        }
    }

    #[test]
    fn monochromatic_eta_is_inverse_speed() {
        let d = VelocityDistribution::monochromatic(Quantity::new(1e5, Unit::M_PER_S), Direction::Isotropic).unwrap();
        let eta = d.eta(Quantity::new(0.0, Unit::M_PER_S)).unwrap();
        assert_eq!(eta.dim(), Dim::INVERSE_SPEED);
        assert!(rel(eta.si(), 1e-5) < 1e-15);
        assert_eq!(d.eta_si(2e5).unwrap(), 0.0);
        assert!(rel(d.mean_inverse_speed().unwrap().si(), 1e-5) < 1e-15);
    }

    #[test]
    fn mb_closed_form_matches_quadrature() {
        for &t in &[300.0, 4.0] {
            for &m in &[0.1, 1.0, 10.0] {
                let d = VelocityDistribution::maxwell_boltzmann(t, gev(m)).unwrap();
                let vth = d.characteristic_speed();
                for i in 0..50 {
                    let vm = 8.0 * vth * i as f64 / 49.0;
                    let want = mb_eta_by_quadrature(t, d_mass(&d), vm);
                    let got = d.eta_si(vm).unwrap();
                    assert!(rel(got, want) < 1e-6, "T={t} m={m} vmin={vm}: {got} vs {want}");
                }
            }
        }
    }

    fn d_mass(d: &VelocityDistribution) -> f64 {
        match d {
            VelocityDistribution::MaxwellBoltzmann { mass_kg, .. } => *mass_kg,
            _ => unreachable!(),
        }
    }

    #[test]
    fn mb_mean_inverse_speed_closed_form() {
        let d = VelocityDistribution::maxwell_boltzmann(300.0, gev(1.0)).unwrap();
        let m = d_mass(&d);
        let want = (2.0 * m / (PI * K_B * 300.0)).sqrt();
        assert!(rel(d.mean_inverse_speed().unwrap().si(), want) < 1e-14);
        assert!(rel(mb_eta_by_quadrature(300.0, m, 0.0), want) < 1e-10);
    }

    #[test]
    fn halo_matches_piecewise_closed_form() {
        let d = VelocityDistribution::standard_halo_default();
        let (v0, ve, vesc) = (220e3, 232e3, 544e3);
        for i in 0..=80 {
            let vm = 800e3 * i as f64 / 80.0;
            let got = d.eta_si(vm).unwrap();
            let want = halo_eta_closed_form(v0, vesc, ve, vm);
            if want == 0.0 {
                assert_eq!(got, 0.0);
            } else {
                assert!(rel(got, want) < 1e-7, "vmin={vm}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn halo_vanishes_beyond_kinematic_support() {
        let d = VelocityDistribution::standard_halo_default();
        assert_eq!(d.eta_si(776e3 + 1.0).unwrap(), 0.0);
        assert_eq!(d.max_speed_si(), Some(776e3));
        let inv = d.mean_inverse_speed().unwrap().si();
        assert!(inv.is_finite() && inv > 0.0);
    }

    #[test]
    fn normalization_of_every_variant() {
        let dists = [
            VelocityDistribution::maxwell_boltzmann(300.0, gev(1.0)).unwrap(),
            VelocityDistribution::maxwell_boltzmann(4.0, Quantity::new(M_PROTON, Unit::KG)).unwrap(),
            VelocityDistribution::standard_halo_default(),
            VelocityDistribution::standard_halo(
                Quantity::new(200.0, Unit::KM_PER_S),
                Quantity::new(300.0, Unit::KM_PER_S),
                Quantity::new(400.0, Unit::KM_PER_S),
            )
            .unwrap(),
        ];
        for d in &dists {
            let n = speed_normalization(d).unwrap();
            assert!((n - 1.0).abs() < 1e-8, "{d:?}: {n}");
        }
    }

    #[test]
    fn pdf_speed_consistent_with_eta() {
        // η(v_min) = ∫_{v_min} g(v)/v dv
        let d = VelocityDistribution::standard_halo_default();
        for &vm in &[0.0f64, 100e3, 400e3, 700e3] {
            let q = integrate(|v| d.pdf_speed(v) / v.max(1e-300), vm.max(1e-9), 776e3, QuadOptions::rel(1e-10))
                .unwrap()
                .value;
            assert!(rel(q, d.eta_si(vm).unwrap()) < 1e-7);
        }
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(VelocityDistribution::maxwell_boltzmann(0.0, gev(1.0)).is_err());
        assert!(VelocityDistribution::maxwell_boltzmann(300.0, Quantity::new(1.0, Unit::M)).is_err());
        assert!(VelocityDistribution::monochromatic(Quantity::new(C, Unit::M_PER_S), Direction::Isotropic).is_err());
        assert!(VelocityDistribution::monochromatic(Quantity::new(1.0, Unit::M_PER_S), Direction::Fixed([0.0; 3])).is_err());
        let d = VelocityDistribution::standard_halo_default();
        assert!(d.eta_si(-1.0).is_err());
    }

    #[test]
    fn fixed_beam_samples_are_constant() {
        let d = VelocityDistribution::monochromatic(Quantity::new(3e5, Unit::M_PER_S), Direction::Fixed([0.0, 0.0, 2.0]))
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            assert_eq!(d.sample(&mut rng), [0.0, 0.0, 3e5]);
        }
    }

    #[test]
    fn isotropic_beam_has_fixed_speed_and_zero_mean() {
        let d = VelocityDistribution::monochromatic(Quantity::new(1e5, Unit::M_PER_S), Direction::Isotropic).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 100_000;
        let mut mean_z = 0.0;
        for _ in 0..n {
            let v = d.sample(&mut rng);
            let s = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            assert!(rel(s, 1e5) < 1e-12);
            mean_z += v[2] / 1e5;
        }
        // cos θ uniform on [−1, 1]: σ = 1/√3
        assert!((mean_z / n as f64).abs() < 5.0 / (3.0 * n as f64).sqrt());
    }

    #[test]
    fn mb_equipartition() {
        let d = VelocityDistribution::maxwell_boltzmann(300.0, gev(1.0)).unwrap();
        let kt_m = K_B * 300.0 / d_mass(&d);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 1_000_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let v = d.sample(&mut rng);
            acc += v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
        }
        let mean = acc / n as f64;
        let sigma = kt_m * 6f64.sqrt() / (n as f64).sqrt();
        assert!((mean - 3.0 * kt_m).abs() < 5.0 * sigma, "{mean} vs {}", 3.0 * kt_m);
    }

    #[test]
    fn halo_samples_respect_escape_speed() {
        let d = VelocityDistribution::standard_halo_default();
        let ve = d.earth_velocity();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200_000 {
            let v = d.sample(&mut rng);
            let u = [v[0] + ve[0], v[1] + ve[1], v[2] + ve[2]];
            assert!((u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt() < 544e3);
        }
    }

    fn check_sampling_against_eta(d: &VelocityDistribution, v_mins: &[f64], seed: u64) {
        let n = 1_000_000;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let speeds: Vec<f64> = (0..n)
            .map(|_| {
                let v = d.sample(&mut rng);
                (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
            })
            .collect();
        for &vm in v_mins {
            let (mut s1, mut s2) = (0.0, 0.0);
            for &s in &speeds {
                if s > vm {
                    s1 += 1.0 / s;
                    s2 += 1.0 / (s * s);
                }
            }
            let mean = s1 / n as f64;
            let se = ((s2 / n as f64 - mean * mean) / n as f64).sqrt();
            let eta = d.eta_si(vm).unwrap();
            assert!((mean - eta).abs() < 5.0 * se, "{} vmin={vm}: {mean} vs {eta} (se {se})", d.name());
        }
    }

    #[test]
    fn mb_sampling_consistent_with_eta() {
        let d = VelocityDistribution::maxwell_boltzmann(300.0, gev(1.0)).unwrap();
        let s = d.characteristic_speed();
        check_sampling_against_eta(&d, &[0.0, 0.5 * s, s, 2.0 * s], 5);
    }

    #[test]
    fn halo_sampling_consistent_with_eta() {
        let d = VelocityDistribution::standard_halo_default();
        check_sampling_against_eta(&d, &[0.0, 200e3, 400e3, 600e3], 6);
    }

    #[test]
    fn reparameterization_only_touches_thermal() {
        let mb = VelocityDistribution::maxwell_boltzmann(4.0, gev(1.0)).unwrap();
        let mb10 = mb.reparameterized(10.0 * d_mass(&mb));
        assert!(rel(mb10.characteristic_speed(), mb.characteristic_speed() / 10f64.sqrt()) < 1e-14);
        let h = VelocityDistribution::standard_halo_default();
        assert_eq!(h.reparameterized(1.0), h);
    }

    #[test]
    fn ln_eta_survives_deep_tail() {
        let d = VelocityDistribution::maxwell_boltzmann(4.0, gev(1000.0)).unwrap();
        let vm = 100.0 * d.characteristic_speed();
        assert_eq!(d.eta_si(vm).unwrap(), 0.0);
        let l = d.ln_eta_si(vm).unwrap();
        assert!(l.is_finite() && l < -9000.0);
    }

    proptest! {
        #[test]
        fn eta_nonincreasing(a in 0.0f64..900e3, b in 0.0f64..900e3, t in 1.0f64..1000.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let dists = [
                VelocityDistribution::maxwell_boltzmann(t, Quantity::new(M_PROTON, Unit::KG)).unwrap(),
                VelocityDistribution::standard_halo_default(),
                VelocityDistribution::monochromatic(Quantity::new(300.0, Unit::KM_PER_S), Direction::Isotropic).unwrap(),
            ];
            for d in &dists {
                let (e_lo, e_hi) = (d.eta_si(lo).unwrap(), d.eta_si(hi).unwrap());
                prop_assert!(e_hi <= e_lo * (1.0 + 1e-9), "{:?}: {} > {}", d, e_hi, e_lo);
                prop_assert!(e_lo.is_finite());
            }
        }
    }
}
