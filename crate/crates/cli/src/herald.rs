//! Phonon Fock populations and entanglement after a Stokes click.

use isobeat::dynamics::{evolve, initial_state};
use isobeat::measurement::{detection_operator, fock_populations, herald_conditional_state, log_negativity, Channel, HeraldedState};
use isobeat::model::{MODE_B1, MODE_B2};
use isobeat::DensityMatrix;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;

/// Smallest Stokes click probability accepted as a herald.
pub const MIN_HERALD_PROB: f64 = 1e-12;

/// One row of `herald.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeraldRow {
    pub t_ps: f64,
    pub p0_b1: f64,
    pub p1_b1: f64,
    pub p2_b1: f64,
    pub p0_b2: f64,
    pub p1_b2: f64,
    pub p2_b2: f64,
    pub e_n: f64,
    pub herald_prob: f64,
}

/// Joint state at the end of the write window, with no read interaction.
pub fn state_after_write(cfg: &RunConfig) -> Result<DensityMatrix<f64>, CliError> {
    let space = cfg.space()?;
    let mut params = cfg.system.clone();
    params.lambda_ra = 0.0;
    params.lambda_fwm = 0.0;
    let (start, end) = params.write.window();
    let rho0 = initial_state(&params, &space)?;
    Ok(evolve(&rho0, start, end, &params, &cfg.integrator)?)
}

/// Heralded phonon state at t = 0 (end of the write window).
pub fn heralded_state(cfg: &RunConfig) -> Result<HeraldedState<f64>, CliError> {
    let rho = state_after_write(cfg)?;
    let d_s = detection_operator(Channel::Stokes, &cfg.detectors, rho.space())?;
    let h = herald_conditional_state(&rho, &d_s)?;
    if h.herald_prob < MIN_HERALD_PROB {
        return Err(CliError::Numerical(format!(
            "herald probability {:e} is below {MIN_HERALD_PROB:e}",
            h.herald_prob
        )));
    }
    Ok(h)
}

/// Samples the freely decaying heralded state at `cfg.herald_times`.
pub fn run_herald(cfg: &RunConfig) -> Result<Vec<HeraldRow>, CliError> {
    let h = heralded_state(cfg)?;
    let mut times = cfg.herald_times.clone();
    times.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
    times
        .iter()
        .map(|&t| {
            let rho = h.evolved(&cfg.system, t)?;
            let b1 = fock_populations(&rho, MODE_B1, 2)?;
            let b2 = fock_populations(&rho, MODE_B2, 2)?;
            Ok(HeraldRow {
                t_ps: t,
                p0_b1: b1[0],
                p1_b1: b1[1],
                p2_b1: b1[2],
                p0_b2: b2[0],
                p1_b2: b2[1],
                p2_b2: b2[2],
                e_n: log_negativity(&rho)?,
                herald_prob: h.herald_prob,
            })
        })
        .collect()
}
