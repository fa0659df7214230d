//! Monte-Carlo fly-by events as an independent estimate of dR/dΔp.
//!
//! Each sample draws a lab velocity from the distribution and an impact
//! point uniform over a disk of radius `b_cut` transverse to it. The flux
//! through the disk gives the event weight `n·v·π·b_cut²/N`. Kicks are
//! computed per event from the impulse formula; events the target could not
//! receive kinematically are discarded, matching the η(v_min) cut of the
//! analytic rate.
//!
//! Samples are processed in fixed-size chunks, each with its own ChaCha
//! stream derived from the seed, and merged in chunk order, so results are
//! bit-identical for a given seed and sample count regardless of threading.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::COULOMB_LAMBDA;
use crate::error::{Error, Result};
use crate::kinematics::acceptance_si;
use crate::quad::{integrate, QuadOptions};
use crate::rate::{differential_rate, number_density, MdmModel, RateOptions};
use crate::sensitivity::Exposure;
use crate::trap::{sql_threshold, TrapConfig};
use crate::units::{Dim, Quantity, Unit};

pub const CHUNK: u64 = 65_536;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BCut {
    /// Per-event radius at which the kick equals a tenth of threshold.
    #[default]
    Auto,
    /// A fixed radius in metres for every event.
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct McRun {
    pub model: MdmModel,
    pub trap: TrapConfig,
    pub n_samples: u64,
    pub seed: u64,
    pub b_cut: BCut,
    pub options: RateOptions,
    pub bins_per_decade: u32,
    pub decades: u32,
}

impl McRun {
    pub fn new(model: MdmModel, trap: TrapConfig, n_samples: u64, seed: u64) -> Result<Self> {
        if n_samples == 0 {
            return Err(Error::invalid("samples", "need at least one"));
        }
        Ok(Self {
            model,
            trap,
            n_samples,
            seed,
            b_cut: BCut::Auto,
            options: RateOptions::default(),
            bins_per_decade: 5,
            decades: 6,
        })
    }

    pub fn with_b_cut(mut self, b_cut: BCut) -> Result<Self> {
        if let BCut::Fixed(b) = b_cut {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::invalid("b_cut", format!("must be positive, got {b} m")));
            }
        }
        self.b_cut = b_cut;
        Ok(self)
    }

    pub fn with_options(mut self, options: RateOptions) -> Self {
        self.options = options;
        self
    }

    pub fn with_binning(mut self, bins_per_decade: u32, decades: u32) -> Result<Self> {
        if bins_per_decade == 0 || decades == 0 {
            return Err(Error::invalid("binning", "bins per decade and decades must be positive"));
        }
        self.bins_per_decade = bins_per_decade;
        self.decades = decades;
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McBin {
    pub lo: f64,
    pub hi: f64,
    /// Events per second per unit momentum (SI).
    pub rate_density: f64,
    pub stat_err: f64,
    pub counts: u64,
    /// Bin average of the analytic spectrum.
    pub analytic_density: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McSpectrum {
    pub bins: Vec<McBin>,
    /// Single-sensor rate of kicks above threshold, 1/s.
    pub rate_above: f64,
    pub rate_above_err: f64,
    pub counts_above: u64,
    /// Rate whose component along the monitored axis clears threshold.
    pub rate_axial_above: f64,
    /// Above-threshold rate weighted with `sqrt(1 − th²/Δp²)`.
    pub rate_eq4_above: f64,
    pub dp_th: f64,
    pub vetoed: u64,
    pub n_samples: u64,
    pub seed: u64,
}

impl McSpectrum {
    /// Fraction of above-threshold events whose axial kick also clears it.
    pub fn empirical_acceptance(&self) -> f64 {
        self.rate_axial_above / self.rate_above
    }

    /// The same fraction predicted by the single-axis acceptance formula.
    pub fn formula_acceptance(&self) -> f64 {
        self.rate_eq4_above / self.rate_above
    }
}

#[derive(Clone)]
struct Tally {
    w: Vec<f64>,
    w2: Vec<f64>,
    n: Vec<u64>,
    above: f64,
    above2: f64,
    above_n: u64,
    axial: f64,
    eq4: f64,
    vetoed: u64,
}

impl Tally {
    fn new(bins: usize) -> Self {
        Self {
            w: vec![0.0; bins],
            w2: vec![0.0; bins],
            n: vec![0; bins],
            above: 0.0,
            above2: 0.0,
            above_n: 0,
            axial: 0.0,
            eq4: 0.0,
            vetoed: 0,
        }
    }

    fn merge(&mut self, o: &Tally) {
        for i in 0..self.w.len() {
            self.w[i] += o.w[i];
            self.w2[i] += o.w2[i];
            self.n[i] += o.n[i];
        }
        self.above += o.above;
        self.above2 += o.above2;
        self.above_n += o.above_n;
        self.axial += o.axial;
        self.eq4 += o.eq4;
        self.vetoed += o.vetoed;
    }
}

struct Sampler {
    n_chi: f64,
    lambda: f64,
    th: f64,
    target_kg: f64,
    projectile_kg: f64,
    b_cut: BCut,
    run: McRun,
    edges: Vec<f64>,
    ln_lo: f64,
    per_ln: f64,
}

impl Sampler {
    fn new(run: &McRun) -> Self {
        let th = sql_threshold(&run.trap).dp_sql.si();
        let lo = th / 10.0;
        let nb = (run.bins_per_decade * run.decades) as usize;
        let edges = (0..=nb)
            .map(|k| lo * 10f64.powf(k as f64 / run.bins_per_decade as f64))
            .collect();
        Self {
            n_chi: number_density(&run.model).si(),
            lambda: run.options.impulse.factor()
                * COULOMB_LAMBDA
                * (run.model.q_chi() * run.trap.species().charge_e()).abs(),
            th,
            target_kg: run.trap.species().mass_kg(),
            projectile_kg: run.model.m_chi().si(),
            b_cut: run.b_cut,
            run: run.clone(),
            edges,
            ln_lo: lo.ln(),
            per_ln: run.bins_per_decade as f64 / std::f64::consts::LN_10,
        }
    }

    fn bin_of(&self, dp: f64) -> Option<usize> {
        let x = (dp.ln() - self.ln_lo) * self.per_ln;
        if x < 0.0 {
            return None;
        }
        let mut i = x as usize;
        // guard the floating floor against the stored edges
        if i < self.edges.len() - 1 && dp < self.edges[i] {
            i = i.saturating_sub(1);
        }
        if i + 1 < self.edges.len() && dp >= self.edges[i + 1] {
            i += 1;
        }
        (i + 1 < self.edges.len()).then_some(i)
    }

    /// Replay the events of chunk `k` in order.
    fn for_each_event(&self, k: u64, mut f: impl FnMut(&Event)) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.run.seed);
        rng.set_stream(k);
        let n = self.run.n_samples;
        let start = k * CHUNK;
        let end = (start + CHUNK).min(n);
        let dist = *self.run.model.dist();
        for i in start..end {
            let vel = dist.sample(&mut rng);
            let v = (vel[0] * vel[0] + vel[1] * vel[1] + vel[2] * vel[2]).sqrt();
            let b_cut = match self.b_cut {
                BCut::Auto => self.lambda / (v * self.th / 10.0),
                BCut::Fixed(b) => b,
            };
            // stratified in the disk area fraction
            let u = (i as f64 + rng.random::<f64>()) / n as f64;
            let phi = 2.0 * PI * rng.random::<f64>();
            let b = b_cut * u.sqrt();
            f(&Event {
                vel,
                v,
                b_cut,
                phi,
                dp: self.lambda / (b * v),
            });
        }
    }

    fn chunk(&self, k: u64) -> Tally {
        let mut t = Tally::new(self.edges.len() - 1);
        let mode = self.run.options.vmin_mode;
        let n = self.run.n_samples as f64;
        self.for_each_event(k, |e| {
            if e.dp > mode.max_transfer_si(e.v, self.target_kg, self.projectile_kg) {
                t.vetoed += 1;
                return;
            }
            let w = self.n_chi * e.v * PI * e.b_cut * e.b_cut / n;
            if let Some(j) = self.bin_of(e.dp) {
                t.w[j] += w;
                t.w2[j] += w * w;
                t.n[j] += 1;
            }
            if e.dp > self.th {
                t.above += w;
                t.above2 += w * w;
                t.above_n += 1;
                t.eq4 += w * acceptance_si(e.dp, self.th);
                // kick direction: azimuth φ about v̂ in the plane ⊥ v̂
                let nz = transverse_unit(e.vel, e.v, e.phi)[2];
                if (e.dp * nz).abs() > self.th {
                    t.axial += w;
                }
            }
        });
        t
    }
}

struct Event {
    vel: [f64; 3],
    v: f64,
    b_cut: f64,
    phi: f64,
    dp: f64,
}

/// Unit vector at azimuth `phi` in the plane perpendicular to `vel`.
fn transverse_unit(vel: [f64; 3], v: f64, phi: f64) -> [f64; 3] {
    let a = [vel[0] / v, vel[1] / v, vel[2] / v];
    // any vector not parallel to a
    let h = if a[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let d = h[0] * a[0] + h[1] * a[1] + h[2] * a[2];
    let e1 = [h[0] - d * a[0], h[1] - d * a[1], h[2] - d * a[2]];
    let l = (e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]).sqrt();
    let e1 = [e1[0] / l, e1[1] / l, e1[2] / l];
    let e2 = [a[1] * e1[2] - a[2] * e1[1], a[2] * e1[0] - a[0] * e1[2], a[0] * e1[1] - a[1] * e1[0]];
    let (s, c) = phi.sin_cos();
    [c * e1[0] + s * e2[0], c * e1[1] + s * e2[1], c * e1[2] + s * e2[2]]
}

fn tally(run: &McRun) -> (Sampler, Tally) {
    let sampler = Sampler::new(run);
    let chunks = run.n_samples.div_ceil(CHUNK);
    let parts: Vec<Tally> = (0..chunks).into_par_iter().map(|k| sampler.chunk(k)).collect();
    let mut total = Tally::new(sampler.edges.len() - 1);
    for p in &parts {
        total.merge(p);
    }
    (sampler, total)
}

/// Histogram of single-sensor kick rates in log bins from th/10 upward.
pub fn mc_spectrum(run: &McRun) -> Result<McSpectrum> {
    let (s, t) = tally(run);
    let single = run.trap.clone().with_sensors(1)?;
    let mut bins = Vec::with_capacity(t.w.len());
    for j in 0..t.w.len() {
        let (lo, hi) = (s.edges[j], s.edges[j + 1]);
        let width = hi - lo;
        bins.push(McBin {
            lo,
            hi,
            rate_density: t.w[j] / width,
            stat_err: t.w2[j].sqrt() / width,
            counts: t.n[j],
            analytic_density: analytic_bin_density(&run.model, &single, run.options, lo, hi)?,
        });
    }
    Ok(McSpectrum {
        bins,
        rate_above: t.above,
        rate_above_err: t.above2.sqrt(),
        counts_above: t.above_n,
        rate_axial_above: t.axial,
        rate_eq4_above: t.eq4,
        dp_th: s.th,
        vetoed: t.vetoed,
        n_samples: run.n_samples,
        seed: run.seed,
    })
}

/// `(1/(hi−lo))·∫_lo^hi dR/dΔp dΔp` by quadrature in ln Δp.
pub fn analytic_bin_density(model: &MdmModel, trap: &TrapConfig, opts: RateOptions, lo: f64, hi: f64) -> Result<f64> {
    let mut failure = None;
    let r = integrate(
        |w: f64| {
            let p = w.exp();
            match differential_rate(model, trap, Quantity::new(p, Unit::KG_M_PER_S), opts) {
                Ok(d) => d.si() * p,
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            }
        },
        lo.ln(),
        hi.ln(),
        QuadOptions {
            rel_tol: 1e-9,
            abs_tol: 0.0,
            max_intervals: 4000,
        },
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(r.value / (hi - lo))
}

/// Smallest charge for which the Monte-Carlo rate, across all sensors and
/// with the single-axis acceptance weight when `run.options` asks for it,
/// yields the required events. Found by bisection in ln q; every trial
/// reuses the run's seed.
pub fn mc_min_charge(run: &McRun, exposure: &Exposure) -> Result<f64> {
    let sensors = run.trap.n_sensors() as f64;
    let t_obs = exposure.t_obs().si_as(Dim::TIME)?;
    let events = |q: f64| -> Result<f64> {
        let mut trial = run.clone();
        trial.model = trial.model.with_charge(q)?;
        let (_, t) = tally(&trial);
        let r = if run.options.apply_acceptance { t.eq4 } else { t.above };
        Ok(r * sensors * t_obs)
    };
    let need = exposure.n_required();
    let (mut lo, mut hi) = (1e-15f64.ln(), 1e3f64.ln());
    if events(hi.exp())? < need {
        return Err(Error::NoSensitivity("Monte-Carlo rate below target at q = 1e3".into()));
    }
    while hi - lo > 1e-7 {
        let mid = 0.5 * (lo + hi);
        if events(mid.exp())? >= need {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}
