//! Explicit adaptive Runge–Kutta integration with local error control.
//!
//! Dormand–Prince 8(5,3): eighth-order propagation with the combined
//! fifth/third-order embedded error estimate of Hairer, Nørsett & Wanner.
//! No dense output; the integrator lands exactly on the requested end time.

#![allow(clippy::excessive_precision)]

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OdeError {
    #[error("step size underflow at t = {t:e} (h = {h:e}) after {steps} steps")]
    StepSizeUnderflow { t: f64, h: f64, steps: usize },
    #[error("step budget of {steps} exhausted at t = {t:e}")]
    MaxSteps { t: f64, steps: usize },
    #[error("state became non-finite at t = {t:e}")]
    NonFinite { t: f64 },
    #[error("energy balance violated: relative residual {residual:e}")]
    EnergyDrift { residual: f64 },
}

/// Right-hand side of `dy/dt = f(t, y)`.
pub trait OdeSystem<const N: usize> {
    fn rhs(&self, t: f64, y: &[f64; N], dydt: &mut [f64; N]);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct Dop853 {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for Dop853 {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            max_steps: 1_000_000,
        }
    }
}

const SAFETY: f64 = 0.9;
const MIN_SHRINK: f64 = 0.333;
const MAX_GROW: f64 = 6.0;

const A: [[f64; 11]; 12] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [5.26001519587677318785587544488E-2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.97250569845378994544595329183E-2, 5.91751709536136983633785987549E-2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [2.95875854768068491816892993775E-2, 0.0, 8.87627564304205475450678981324E-2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [2.41365134159266685502369798665E-1, 0.0, -8.84549479328286085344864962717E-1, 9.24834003261792003115737966543E-1, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.7037037037037037037037037037E-2, 0.0, 0.0, 1.70828608729473871279604482173E-1, 1.25467687566822425016691814123E-1, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.7109375E-2, 0.0, 0.0, 1.70252211019544039314978060272E-1, 6.02165389804559606850219397283E-2, -1.7578125E-2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.70920001185047927108779319836E-2, 0.0, 0.0, 1.70383925712239993810214054705E-1, 1.07262030446373284651809199168E-1, -1.53194377486244017527936158236E-2, 8.27378916381402288758473766002E-3, 0.0, 0.0, 0.0, 0.0],
    [6.24110958716075717114429577812E-1, 0.0, 0.0, -3.36089262944694129406857109825E0, -8.68219346841726006818189891453E-1, 2.75920996994467083049415600797E1, 2.01540675504778934086186788979E1, -4.34898841810699588477366255144E1, 0.0, 0.0, 0.0],
    [4.77662536438264365890433908527E-1, 0.0, 0.0, -2.48811461997166764192642586468E0, -5.90290826836842996371446475743E-1, 2.12300514481811942347288949897E1, 1.52792336328824235832596922938E1, -3.32882109689848629194453265587E1, -2.03312017085086261358222928593E-2, 0.0, 0.0],
    [-9.3714243008598732571704021658E-1, 0.0, 0.0, 5.18637242884406370830023853209E0, 1.09143734899672957818500254654E0, -8.14978701074692612513997267357E0, -1.85200656599969598641566180701E1, 2.27394870993505042818970056734E1, 2.49360555267965238987089396762E0, -3.0467644718982195003823669022E0, 0.0],
    [2.27331014751653820792359768449E0, 0.0, 0.0, -1.05344954667372501984066689879E1, -2.00087205822486249909675718444E0, -1.79589318631187989172765950534E1, 2.79488845294199600508499808837E1, -2.85899827713502369474065508674E0, -8.87285693353062954433549289258E0, 1.23605671757943030647266201528E1, 6.43392746015763530355970484046E-1],
];
const C: [f64; 12] = [0.0, 0.526001519587677318785587544488E-01, 0.789002279381515978178381316732E-01, 0.118350341907227396726757197510E+00, 0.281649658092772603273242802490E+00, 0.333333333333333333333333333333E+00, 0.25E+00, 0.307692307692307692307692307692E+00, 0.651282051282051282051282051282E+00, 0.6E+00, 0.857142857142857142857142857142E+00, 1.0];
const B: [f64; 12] = [5.42937341165687622380535766363E-2, 0.0, 0.0, 0.0, 0.0, 4.45031289275240888144113950566E0, 1.89151789931450038304281599044E0, -5.8012039600105847814672114227E0, 3.1116436695781989440891606237E-1, -1.52160949662516078556178806805E-1, 2.01365400804030348374776537501E-1, 4.47106157277725905176885569043E-2];
const ER: [f64; 12] = [0.1312004499419488073250102996E-01, 0.0, 0.0, 0.0, 0.0, -0.1225156446376204440720569753E+01, -0.4957589496572501915214079952E+00, 0.1664377182454986536961530415E+01, -0.3503288487499736816886487290E+00, 0.3341791187130174790297318841E+00, 0.8192320648511571246570742613E-01, -0.2235530786388629525884427845E-01];
const BHH: [f64; 3] = [0.244094488188976377952755905512E+00, 0.733846688281611857341361741547E+00, 0.220588235294117647058823529412E-01];

impl Dop853 {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Self {
            rtol,
            atol,
            ..Self::default()
        }
    }

    /// Integrate from `(t0, y0)` to `t1`.
    pub fn integrate<S: OdeSystem<N>, const N: usize>(
        &self,
        sys: &S,
        t0: f64,
        y0: [f64; N],
        t1: f64,
    ) -> Result<([f64; N], OdeStats), OdeError> {
        let mut stats = OdeStats {
            accepted: 0,
            rejected: 0,
            evaluations: 0,
        };
        let mut t = t0;
        let mut y = y0;
        if t1 == t0 {
            return Ok((y, stats));
        }
        let dir = (t1 - t0).signum();
        let span = (t1 - t0).abs();
        let mut k = [[0.0; N]; 12];
        sys.rhs(t, &y, &mut k[0]);
        stats.evaluations += 1;
        let mut h = dir * self.initial_step(&y, &k[0], span);
        let mut last_rejected = false;

        loop {
            if stats.accepted + stats.rejected >= self.max_steps {
                return Err(OdeError::MaxSteps {
                    t,
                    steps: self.max_steps,
                });
            }
            if (t + h - t1) * dir > 0.0 {
                h = t1 - t;
            }
            if h.abs() < 4.0 * f64::EPSILON * t.abs().max(span) && (t1 - t).abs() > h.abs() {
                return Err(OdeError::StepSizeUnderflow {
                    t,
                    h,
                    steps: stats.accepted + stats.rejected,
                });
            }

            let mut stage = [0.0; N];
            for s in 1..12 {
                for i in 0..N {
                    let mut acc = 0.0;
                    for j in 0..s {
                        acc += A[s][j] * k[j][i];
                    }
                    stage[i] = y[i] + h * acc;
                }
                sys.rhs(t + C[s] * h, &stage, &mut k[s]);
            }
            stats.evaluations += 11;

            let mut y_new = [0.0; N];
            let mut err5 = 0.0;
            let mut err3 = 0.0;
            for i in 0..N {
                let mut incr = 0.0;
                let mut e5 = 0.0;
                for s in 0..12 {
                    incr += B[s] * k[s][i];
                    e5 += ER[s] * k[s][i];
                }
                y_new[i] = y[i] + h * incr;
                let scale = self.atol + self.rtol * y[i].abs().max(y_new[i].abs());
                let e3 = incr - BHH[0] * k[0][i] - BHH[1] * k[8][i] - BHH[2] * k[11][i];
                err5 += (e5 / scale).powi(2);
                err3 += (e3 / scale).powi(2);
            }
            if !y_new.iter().all(|v| v.is_finite()) {
                return Err(OdeError::NonFinite { t });
            }
            let mut deno = err5 + 0.01 * err3;
            if deno <= 0.0 {
                deno = 1.0;
            }
            let err = h.abs() * err5 / (deno * N as f64).sqrt();

            let factor = if err == 0.0 {
                MAX_GROW
            } else {
                (SAFETY * err.powf(-1.0 / 8.0)).clamp(MIN_SHRINK, MAX_GROW)
            };

            if err <= 1.0 {
                stats.accepted += 1;
                t += h;
                y = y_new;
                if (t - t1) * dir >= 0.0 {
                    return Ok((y, stats));
                }
                sys.rhs(t, &y, &mut k[0]);
                stats.evaluations += 1;
                h *= if last_rejected { factor.min(1.0) } else { factor };
                last_rejected = false;
            } else {
                stats.rejected += 1;
                h *= factor.min(1.0);
                last_rejected = true;
            }
        }
    }

    fn initial_step<const N: usize>(&self, y: &[f64; N], f: &[f64; N], span: f64) -> f64 {
        let mut d0 = 0.0;
        let mut d1 = 0.0;
        for i in 0..N {
            let scale = self.atol + self.rtol * y[i].abs();
            d0 += (y[i] / scale).powi(2);
            d1 += (f[i] / scale).powi(2);
        }
        let h = if d0 < 1e-10 || d1 < 1e-10 {
            1e-6 * span
        } else {
            0.01 * (d0 / d1).sqrt()
        };
        h.min(span)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Oscillator {
        omega: f64,
    }

    impl OdeSystem<2> for Oscillator {
        fn rhs(&self, _t: f64, y: &[f64; 2], dydt: &mut [f64; 2]) {
            dydt[0] = y[1];
            dydt[1] = -self.omega * self.omega * y[0];
        }
    }

    #[test]
    fn tableau_consistency() {
        for s in 0..12 {
            let row: f64 = A[s].iter().sum();
            assert!((row - C[s]).abs() < 1e-13, "row {s}");
        }
        assert!((B.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn exponential_decay() {
        struct Decay;
        impl OdeSystem<1> for Decay {
            fn rhs(&self, _t: f64, y: &[f64; 1], d: &mut [f64; 1]) {
                d[0] = -y[0];
            }
        }
        let (y, _) = Dop853::new(1e-12, 1e-14).integrate(&Decay, 0.0, [1.0], 5.0).unwrap();
        assert!((y[0] / (-5.0f64).exp() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn oscillator_phase_after_ten_periods() {
        let osc = Oscillator { omega: 2.0 };
        let period = std::f64::consts::PI;
        let (y, stats) = Dop853::default().integrate(&osc, 0.0, [1.0, 0.0], 10.0 * period).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-8, "x = {}", y[0]);
        assert!(y[1].abs() < 1e-7);
        assert!(stats.rejected < stats.accepted);
    }

    #[test]
    fn backwards_integration() {
        let osc = Oscillator { omega: 1.0 };
        let (y, _) = Dop853::default().integrate(&osc, 1.0, [1.0f64.cos(), -1.0f64.sin()], 0.0).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-9 && y[1].abs() < 1e-9);
    }

    #[test]
    fn step_budget_is_enforced() {
        let osc = Oscillator { omega: 1.0 };
        let solver = Dop853 {
            max_steps: 5,
            ..Dop853::default()
        };
        assert!(matches!(
            solver.integrate(&osc, 0.0, [1.0, 0.0], 1e3),
            Err(OdeError::MaxSteps { .. })
        ));
    }
}
