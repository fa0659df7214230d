//! Brute-force oracles for the analytic formulas: trajectory integration of
//! a trapped charge during a fly-by, and Monte-Carlo event generation.

pub mod flyby;
pub mod mc;

pub use flyby::{
    free_oscillation_drift, ode_flyby, validate_impulse_regime, Axis, OdeOutcome, OdeScenario, RegimeRow,
};
pub use mc::{mc_min_charge, mc_spectrum, BCut, McBin, McRun, McSpectrum};
