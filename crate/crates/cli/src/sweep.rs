//! g²(Δt) for the noisy, ideal and statistical-mixture variants.

use std::fmt;

use isobeat::dynamics::run_two_pulse;
use isobeat::measurement::{coincidences, detection_operator, Channel, Coincidences, DetectorModel};
use isobeat::model::SystemParams;
use isobeat::{DensityMatrix, HilbertSpace, IntegratorConfig, Op};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Variant {
    /// Configured detectors and FWM coupling.
    Noisy,
    /// Perfect detectors, no FWM; thermal phonons kept.
    Ideal,
    /// Incoherent sum of single-mode runs weighted by β².
    Mixture,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Noisy, Variant::Ideal, Variant::Mixture];

    pub fn tag(self) -> &'static str {
        match self {
            Variant::Noisy => "noisy",
            Variant::Ideal => "ideal",
            Variant::Mixture => "mixture",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// One row of `sweep.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub delta_t_ps: f64,
    pub variant: &'static str,
    pub g2: f64,
    pub p_s: f64,
    pub p_a: f64,
    pub p_sa: f64,
}

impl SweepRecord {
    fn new(delta_t: f64, variant: Variant, c: Coincidences<f64>) -> Result<Self, CliError> {
        Ok(Self { delta_t_ps: delta_t, variant: variant.tag(), g2: c.g2()?, p_s: c.p_s, p_a: c.p_a, p_sa: c.p_sa })
    }
}

struct Detectors {
    d_s: Op<f64>,
    d_a: Op<f64>,
}

impl Detectors {
    fn new(model: &DetectorModel<f64>, space: &HilbertSpace) -> Result<Self, CliError> {
        Ok(Self {
            d_s: detection_operator(Channel::Stokes, model, space)?,
            d_a: detection_operator(Channel::AntiStokes, model, space)?,
        })
    }

    fn measure(&self, rho: &DensityMatrix<f64>) -> Result<Coincidences<f64>, CliError> {
        Ok(coincidences(rho, &self.d_s, &self.d_a)?)
    }
}

/// Everything a sweep point needs, built once and shared by the workers.
pub struct Sweeper {
    space: HilbertSpace,
    params: SystemParams<f64>,
    ideal_params: SystemParams<f64>,
    single_mode: [SystemParams<f64>; 2],
    integrator: IntegratorConfig<f64>,
    noisy: Detectors,
    ideal: Detectors,
}

impl Sweeper {
    pub fn new(cfg: &RunConfig) -> Result<Self, CliError> {
        let space = cfg.space()?;
        let params = cfg.system.clone();
        let mut ideal_params = params.clone();
        ideal_params.lambda_fwm = 0.0;
        let single = |j: usize| {
            let mut p = params.clone();
            p.phonons[j].beta = 1.0;
            p.phonons[1 - j].beta = 0.0;
            p
        };
        Ok(Self {
            noisy: Detectors::new(&cfg.detectors, &space)?,
            ideal: Detectors::new(&DetectorModel::ideal(), &space)?,
            single_mode: [single(0), single(1)],
            space,
            params,
            ideal_params,
            integrator: cfg.integrator,
        })
    }

    fn final_state(&self, delta_t: f64, params: &SystemParams<f64>) -> Result<DensityMatrix<f64>, CliError> {
        Ok(run_two_pulse(delta_t, params, &self.space, &self.integrator)?.rho_final)
    }

    /// Rows for one delay, in `variants` order.
    pub fn point(&self, delta_t: f64, variants: &[Variant]) -> Result<Vec<SweepRecord>, CliError> {
        let mut coherent = None;
        let mut rows = Vec::with_capacity(variants.len());
        for &v in variants {
            let c = match v {
                Variant::Noisy => {
                    let rho = self.final_state(delta_t, &self.params)?;
                    let c = self.noisy.measure(&rho)?;
                    coherent = Some(rho);
                    c
                }
                Variant::Ideal => {
                    let reuse = self.ideal_params == self.params;
                    match (&coherent, reuse) {
                        (Some(rho), true) => self.ideal.measure(rho)?,
                        _ => self.ideal.measure(&self.final_state(delta_t, &self.ideal_params)?)?,
                    }
                }
                Variant::Mixture => {
                    let mut parts = Vec::with_capacity(2);
                    for (j, p) in self.single_mode.iter().enumerate() {
                        let w = self.params.phonons[j].beta.powi(2);
                        if w > 0.0 {
                            parts.push((w, self.noisy.measure(&self.final_state(delta_t, p)?)?));
                        }
                    }
                    Coincidences::mix(&parts)
                }
            };
            rows.push(SweepRecord::new(delta_t, v, c)?);
        }
        Ok(rows)
    }
}

/// Parallel sweep over `cfg.delta_ts`; rows sorted by variant, then Δt.
pub fn run_sweep(cfg: &RunConfig, variants: &[Variant]) -> Result<Vec<SweepRecord>, CliError> {
    let sweeper = Sweeper::new(cfg)?;
    let per_point: Vec<Vec<SweepRecord>> = cfg
        .delta_ts
        .par_iter()
        .map(|&dt| sweeper.point(dt, variants))
        .collect::<Result<_, _>>()?;
    let mut rows: Vec<SweepRecord> = per_point.into_iter().flatten().collect();
    let order = |tag: &str| Variant::ALL.iter().position(|v| v.tag() == tag).unwrap_or(usize::MAX);
    rows.sort_by(|a, b| {
        order(a.variant)
            .cmp(&order(b.variant))
            .then(a.delta_t_ps.partial_cmp(&b.delta_t_ps).expect("finite delays"))
    });
    Ok(rows)
}

/// (Δt, g²) series of one variant.
pub fn series(rows: &[SweepRecord], variant: Variant) -> Vec<(f64, f64)> {
    rows.iter().filter(|r| r.variant == variant.tag()).map(|r| (r.delta_t_ps, r.g2)).collect()
}
