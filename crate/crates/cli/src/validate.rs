//! Invariant checks run against a configuration, each reported as a
//! measured deviation against a tolerance.

use std::fmt::Write as _;

use isobeat::dynamics::{run_two_pulse, run_two_pulse_sampled, IntegratorConfig, TRACE_DRIFT_TOL};
use isobeat::hilbert::{thermal_state, DensityMatrix};
use isobeat::measurement::{coincidences, detection_operator, fock_populations, log_negativity, Channel, DetectorModel};
use isobeat::model::{canonical_space, phonon_space, SystemParams};
use isobeat::C64;
use nalgebra::DVector;
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::CliError;

/// Delays probed by the g²-based checks (ps).
pub const PROBE_DELAYS: [f64; 2] = [1.0, 2.5];
pub const INVARIANCE_TOL: f64 = 1e-6;
pub const TRUNCATION_TOL: f64 = 5e-3;
pub const STEP_TOL: f64 = 1e-4;
/// Fixed RK4 step of the reference solution (ps).
pub const REFERENCE_STEP_PS: f64 = 0.001;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub deviation: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.deviation.is_finite() && self.deviation <= self.tolerance
    }
}

fn g2_at(params: &SystemParams<f64>, dims: [usize; 4], integrator: &IntegratorConfig<f64>, detectors: &DetectorModel<f64>, dt: f64) -> Result<f64, CliError> {
    let space = canonical_space(dims)?;
    let rho = run_two_pulse(dt, params, &space, integrator)?.rho_final;
    let d_s = detection_operator(Channel::Stokes, detectors, &space)?;
    let d_a = detection_operator(Channel::AntiStokes, detectors, &space)?;
    Ok(coincidences(&rho, &d_s, &d_a)?.g2()?)
}

/// Largest relative g² change between `reference` and `variant` runs over
/// the probe delays.
fn max_relative_change(
    cfg: &RunConfig,
    reference: (&SystemParams<f64>, [usize; 4], &IntegratorConfig<f64>),
    variant: (&SystemParams<f64>, [usize; 4], &IntegratorConfig<f64>),
) -> Result<(f64, String), CliError> {
    let mut worst: f64 = 0.0;
    let mut detail = String::new();
    for dt in PROBE_DELAYS {
        let a = g2_at(reference.0, reference.1, reference.2, &cfg.detectors, dt)?;
        let b = g2_at(variant.0, variant.1, variant.2, &cfg.detectors, dt)?;
        let rel = (b / a - 1.0).abs();
        worst = worst.max(rel);
        let _ = write!(detail, "dt={dt}: {a:.8} vs {b:.8}; ");
    }
    Ok((worst, detail.trim_end_matches("; ").to_string()))
}

fn trace_drift(cfg: &RunConfig) -> Result<Check, CliError> {
    let space = cfg.space()?;
    let mut drift: f64 = 0.0;
    for dt in PROBE_DELAYS {
        let res = run_two_pulse_sampled(dt, &cfg.system, &space, &cfg.integrator, Some(0.25))?;
        for (_, rho) in &res.timeline {
            drift = drift.max((rho.trace() - C64::new(1.0, 0.0)).norm());
        }
    }
    Ok(Check { name: "trace-drift", deviation: drift, tolerance: TRACE_DRIFT_TOL, detail: "max |tr rho - 1| over sampled protocol".into() })
}

fn positivity(cfg: &RunConfig) -> Result<Check, CliError> {
    let space = cfg.space()?;
    let mut min_eig = f64::INFINITY;
    for dt in PROBE_DELAYS {
        let res = run_two_pulse_sampled(dt, &cfg.system, &space, &cfg.integrator, Some(0.5))?;
        for (_, rho) in &res.timeline {
            min_eig = min_eig.min(rho.min_eigenvalue());
        }
    }
    Ok(Check {
        name: "positivity",
        deviation: (-min_eig).max(0.0),
        tolerance: 1e-8,
        detail: format!("min eigenvalue {min_eig:.3e}"),
    })
}

fn frame_invariance(cfg: &RunConfig) -> Result<Check, CliError> {
    let shift = 2.0;
    let mut shifted = cfg.system.clone();
    for p in &mut shifted.phonons {
        p.delta += shift;
    }
    shifted.delta_s -= shift;
    shifted.delta_a += shift;
    let (dev, detail) = max_relative_change(cfg, (&cfg.system, cfg.dims, &cfg.integrator), (&shifted, cfg.dims, &cfg.integrator))?;
    Ok(Check { name: "frame-invariance", deviation: dev, tolerance: INVARIANCE_TOL, detail })
}

fn theta_split(cfg: &RunConfig) -> Result<Check, CliError> {
    let moved = cfg.system.clone().with_theta_split(cfg.system.theta_write - 0.5 * cfg.system.theta - 0.1);
    let (dev, detail) = max_relative_change(cfg, (&cfg.system, cfg.dims, &cfg.integrator), (&moved, cfg.dims, &cfg.integrator))?;
    Ok(Check { name: "theta-split-invariance", deviation: dev, tolerance: INVARIANCE_TOL, detail })
}

fn truncation(cfg: &RunConfig) -> Result<Check, CliError> {
    let reference = cfg.dims.map(|d| (d + 1).max(4));
    let (dev, detail) = max_relative_change(cfg, (&cfg.system, reference, &cfg.integrator), (&cfg.system, cfg.dims, &cfg.integrator))?;
    Ok(Check {
        name: "truncation-convergence",
        deviation: dev,
        tolerance: TRUNCATION_TOL,
        detail: format!("dims {:?} vs {:?}: {detail}", cfg.dims, reference),
    })
}

fn step_convergence(cfg: &RunConfig) -> Result<Check, CliError> {
    let reference = IntegratorConfig { free_fast_path: cfg.integrator.free_fast_path, ..IntegratorConfig::rk4(REFERENCE_STEP_PS) };
    let (dev, detail) = max_relative_change(cfg, (&cfg.system, cfg.dims, &reference), (&cfg.system, cfg.dims, &cfg.integrator))?;
    Ok(Check { name: "step-convergence", deviation: dev, tolerance: STEP_TOL, detail: format!("configured vs rk4 h={REFERENCE_STEP_PS} ps: {detail}") })
}

fn step_halving(cfg: &RunConfig) -> Result<Check, CliError> {
    let fine = IntegratorConfig::rk4(REFERENCE_STEP_PS);
    let coarse = IntegratorConfig::rk4(2.0 * REFERENCE_STEP_PS);
    let (dev, detail) = max_relative_change(cfg, (&cfg.system, cfg.dims, &fine), (&cfg.system, cfg.dims, &coarse))?;
    Ok(Check { name: "rk4-step-halving", deviation: dev, tolerance: STEP_TOL, detail })
}

fn thermal_bound(cfg: &RunConfig) -> Result<Check, CliError> {
    let mut params = cfg.system.clone();
    params.lambda_fwm = 0.0;
    let bound = 1.0 + 1.0 / params.n_th;
    let mut excess: f64 = 0.0;
    let mut detail = String::new();
    for dt in PROBE_DELAYS {
        let g2 = g2_at(&params, cfg.dims, &cfg.integrator, &DetectorModel::ideal(), dt)?;
        excess = excess.max(g2 - bound).max(1.0 - g2);
        let _ = write!(detail, "dt={dt}: {g2:.4}; ");
    }
    Ok(Check {
        name: "ideal-thermal-bound",
        deviation: excess.max(0.0),
        tolerance: INVARIANCE_TOL,
        detail: format!("1 <= g2 <= {bound:.4}; {}", detail.trim_end_matches("; ")),
    })
}

/// Log-negativity of β₁|10⟩ + β₂|01⟩ against log₂(1 + 2β₁β₂), and thermal
/// Fock populations against the truncated Bose–Einstein law.
fn analytic_oracles(cfg: &RunConfig) -> Result<Check, CliError> {
    let space = phonon_space(&cfg.space()?)?;
    let d = space.dims();
    let mut worst: f64 = 0.0;
    for k in 1..=5 {
        let b1 = (k as f64 / 6.0).sqrt();
        let b2 = (1.0 - b1 * b1).sqrt();
        let mut psi = DVector::from_element(space.total_dim(), C64::new(0.0, 0.0));
        psi[space.index_of(&[1, 0])?] = C64::new(b1, 0.0);
        psi[space.index_of(&[0, 1])?] = C64::from_polar(b2, 0.7 * k as f64);
        let rho = DensityMatrix::pure(&space, &psi)?;
        worst = worst.max((log_negativity(&rho)? - (1.0 + 2.0 * b1 * b2).log2()).abs());
    }
    let n = cfg.system.n_th;
    let local = [thermal_state(d[0], n)?, thermal_state(d[1], n)?];
    let rho = DensityMatrix::product(&space, &local)?;
    let q = n / (1.0 + n);
    let z: f64 = (0..d[0]).map(|k| q.powi(k as i32)).sum();
    for (k, p) in fock_populations(&rho, 0, d[0] - 1)?.iter().enumerate() {
        worst = worst.max((p - q.powi(k as i32) / z).abs());
    }
    Ok(Check { name: "analytic-oracles", deviation: worst, tolerance: 1e-9, detail: "log-negativity and thermal populations".into() })
}

type CheckFn = fn(&RunConfig) -> Result<Check, CliError>;

const CHECKS: [(&str, CheckFn); 9] = [
    ("trace-drift", trace_drift),
    ("positivity", positivity),
    ("frame-invariance", frame_invariance),
    ("theta-split-invariance", theta_split),
    ("truncation-convergence", truncation),
    ("step-convergence", step_convergence),
    ("rk4-step-halving", step_halving),
    ("ideal-thermal-bound", thermal_bound),
    ("analytic-oracles", analytic_oracles),
];

/// Runs every check in parallel. A check whose computation fails is
/// reported as failed with the error text.
pub fn run_validation(cfg: &RunConfig) -> Vec<Check> {
    CHECKS
        .par_iter()
        .map(|(name, f)| {
            f(cfg).unwrap_or_else(|e| Check { name, deviation: f64::INFINITY, tolerance: 0.0, detail: format!("error: {e}") })
        })
        .collect()
}

pub fn format_report(checks: &[Check]) -> String {
    let mut s = String::new();
    for c in checks {
        let _ = writeln!(
            s,
            "{:<5} {:<24} deviation {:<10.3e} tolerance {:<8.1e} {}",
            if c.passed() { "PASS" } else { "FAIL" },
            c.name,
            c.deviation,
            c.tolerance,
            c.detail
        );
    }
    s
}

/// `Err(Validation)` naming the failed checks, if any.
pub fn verdict(checks: &[Check]) -> Result<(), CliError> {
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed()).map(|c| c.name).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Validation(format!("failed checks: {}", failed.join(", "))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracles_pass_and_verdict_names_failures() {
        let cfg = RunConfig::default();
        let c = analytic_oracles(&cfg).unwrap();
        assert!(c.passed(), "{c:?}");
        let bad = Check { name: "x", deviation: 1.0, tolerance: 0.1, detail: String::new() };
        let err = verdict(&[c, bad]).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(err.to_string().contains("x"));
    }

    #[test]
    fn two_level_truncation_is_flagged() {
        let mut cfg = RunConfig::default();
        cfg.dims = [2, 2, 2, 2];
        let c = truncation(&cfg).unwrap();
        assert!(!c.passed(), "{c:?}");
    }
}
