//! TOML run configuration. Every physical key carries its unit as a suffix.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use isobeat::dynamics::{IntegratorConfig, Method};
use isobeat::model::{canonical_space, PhononMode, PulseRole, PulseSpec, SystemParams};
use isobeat::{DetectorModel, HilbertSpace};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemSection {
    pub lambda_ws_per_ps: f64,
    pub lambda_ra_per_ps: f64,
    pub lambda_fwm_per_ps: f64,
    pub theta_rad: f64,
    /// Part of θ carried by the write term; defaults to all of it.
    pub theta_write_rad: Option<f64>,
    pub n_th: f64,
    pub beta1: f64,
    pub tau1_ps: f64,
    pub tau2_ps: f64,
    /// Splitting of the two lines; δ₁ = −δ₂ = π·beat.
    pub beat_ghz: f64,
    /// Explicit detunings; both or neither.
    pub delta1_rad_per_ps: Option<f64>,
    pub delta2_rad_per_ps: Option<f64>,
    pub sigma_write_ps: f64,
    pub sigma_read_ps: f64,
    pub delta_s_rad_per_ps: f64,
    pub delta_a_rad_per_ps: f64,
}

impl Default for SystemSection {
    fn default() -> Self {
        Self {
            lambda_ws_per_ps: 0.104,
            lambda_ra_per_ps: 0.136,
            lambda_fwm_per_ps: 0.0,
            theta_rad: PI / 6.0,
            theta_write_rad: None,
            n_th: 0.04,
            beta1: (1.0f64 / 3.0).sqrt(),
            tau1_ps: 8.4,
            tau2_ps: 1.7,
            beat_ghz: 258.0,
            delta1_rad_per_ps: None,
            delta2_rad_per_ps: None,
            sigma_write_ps: 0.085,
            sigma_read_ps: 0.085,
            delta_s_rad_per_ps: 0.0,
            delta_a_rad_per_ps: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSection {
    pub eta_s: f64,
    pub eta_a: f64,
    pub pdc_s: f64,
    pub pdc_a: f64,
}

impl Default for DetectorSection {
    fn default() -> Self {
        let d = DetectorModel::<f64>::paper_defaults();
        Self { eta_s: d.eta_s, eta_a: d.eta_a, pdc_s: d.pdc_s, pdc_a: d.pdc_a }
    }
}

/// Inclusive time grid: `points_ps`, or `start_ps..=stop_ps` by `step_ps`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default)]
    pub start_ps: Option<f64>,
    #[serde(default)]
    pub stop_ps: Option<f64>,
    #[serde(default)]
    pub step_ps: Option<f64>,
    #[serde(default)]
    pub points_ps: Option<Vec<f64>>,
}

impl GridSection {
    fn points(&self, name: &str, defaults: (f64, f64, f64)) -> Result<Vec<f64>, CliError> {
        if let Some(p) = &self.points_ps {
            if p.is_empty() || p.iter().any(|x| !x.is_finite()) {
                return Err(CliError::Config(format!("[{name}] points_ps must be a non-empty list of finite values")));
            }
            return Ok(p.clone());
        }
        let start = self.start_ps.unwrap_or(defaults.0);
        let stop = self.stop_ps.unwrap_or(defaults.1);
        let step = self.step_ps.unwrap_or(defaults.2);
        if !(step > 0.0) || !(stop >= start) || !start.is_finite() || !stop.is_finite() {
            return Err(CliError::Config(format!(
                "[{name}] needs step_ps > 0 and stop_ps >= start_ps (got {start} .. {stop} step {step})"
            )));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        Ok((0..=n).map(|i| start + i as f64 * step).collect())
    }
}

/// Write/read delays; default 0.3 to 10 ps by 0.1 ps.
pub const SWEEP_DEFAULT: (f64, f64, f64) = (0.3, 10.0, 0.1);
/// Times after the herald; default 0 to 10 ps by 0.1 ps.
pub const HERALD_DEFAULT: (f64, f64, f64) = (0.0, 10.0, 0.1);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodName {
    Dopri5,
    Rk4,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorSection {
    pub method: MethodName,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Step cap; the fixed step for rk4.
    pub max_step_ps: f64,
    pub max_steps: usize,
    pub free_fast_path: bool,
}

impl Default for IntegratorSection {
    fn default() -> Self {
        let d = IntegratorConfig::<f64>::default();
        Self {
            method: MethodName::Dopri5,
            rel_tol: d.rel_tol,
            abs_tol: d.abs_tol,
            max_step_ps: d.max_step,
            max_steps: d.max_steps,
            free_fast_path: d.free_fast_path,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TruncationSection {
    pub b1: usize,
    pub b2: usize,
    pub stokes: usize,
    pub anti_stokes: usize,
}

impl Default for TruncationSection {
    fn default() -> Self {
        Self { b1: 3, b2: 3, stokes: 3, anti_stokes: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    pub svg: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: None, svg: true }
    }
}

/// The file layout.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub system: SystemSection,
    pub detectors: DetectorSection,
    pub sweep: GridSection,
    pub herald: GridSection,
    pub integrator: IntegratorSection,
    pub truncation: TruncationSection,
    pub output: OutputSection,
}

/// Validated configuration, in simulator types.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub system: SystemParams<f64>,
    pub detectors: DetectorModel<f64>,
    pub delta_ts: Vec<f64>,
    pub herald_times: Vec<f64>,
    pub integrator: IntegratorConfig<f64>,
    pub dims: [usize; 4],
    pub out_dir: Option<PathBuf>,
    pub svg: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        ConfigFile::default().resolve().expect("defaults are valid")
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        file.resolve()
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn space(&self) -> Result<HilbertSpace, CliError> {
        canonical_space(self.dims).map_err(|e| CliError::Config(e.to_string()))
    }
}

impl ConfigFile {
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let s = &self.system;
        let cfg = |e: isobeat::Error| CliError::Config(e.to_string());
        if !(s.beta1 >= 0.0 && s.beta1 <= 1.0) {
            return Err(CliError::Config(format!("[system] beta1 must lie in [0, 1], got {}", s.beta1)));
        }
        for (name, tau) in [("tau1_ps", s.tau1_ps), ("tau2_ps", s.tau2_ps)] {
            if !(tau > 0.0) {
                return Err(CliError::Config(format!("[system] {name} must be > 0, got {tau}")));
            }
        }
        let (d1, d2) = match (s.delta1_rad_per_ps, s.delta2_rad_per_ps) {
            (Some(a), Some(b)) => (a, b),
            (None, None) => {
                let half = PI * s.beat_ghz * 1e-3;
                (half, -half)
            }
            _ => return Err(CliError::Config("[system] give both delta1_rad_per_ps and delta2_rad_per_ps, or neither".into())),
        };
        let beta2 = (1.0 - s.beta1 * s.beta1).max(0.0).sqrt();
        let system = SystemParams {
            phonons: [PhononMode::from_lifetime(d1, s.beta1, s.tau1_ps), PhononMode::from_lifetime(d2, beta2, s.tau2_ps)],
            lambda_ws: s.lambda_ws_per_ps,
            lambda_ra: s.lambda_ra_per_ps,
            lambda_fwm: s.lambda_fwm_per_ps,
            theta: s.theta_rad,
            theta_write: s.theta_write_rad.unwrap_or(s.theta_rad),
            n_th: s.n_th,
            write: PulseSpec::new(0.0, s.sigma_write_ps, PulseRole::Write).map_err(cfg)?,
            read: PulseSpec::new(2.0, s.sigma_read_ps, PulseRole::Read).map_err(cfg)?,
            delta_s: s.delta_s_rad_per_ps,
            delta_a: s.delta_a_rad_per_ps,
        };
        system.validate().map_err(cfg)?;

        let d = &self.detectors;
        let detectors = DetectorModel { eta_s: d.eta_s, eta_a: d.eta_a, pdc_s: d.pdc_s, pdc_a: d.pdc_a };
        detectors.validate().map_err(cfg)?;

        let delta_ts = self.sweep.points("sweep", SWEEP_DEFAULT)?;
        if let Some(bad) = delta_ts.iter().find(|&&t| t < 0.0) {
            return Err(CliError::Config(format!("[sweep] delays must be >= 0 ps, got {bad}")));
        }
        let herald_times = self.herald.points("herald", HERALD_DEFAULT)?;
        if let Some(bad) = herald_times.iter().find(|&&t| t < 0.0) {
            return Err(CliError::Config(format!("[herald] times must be >= 0 ps, got {bad}")));
        }

        let i = &self.integrator;
        let integrator = IntegratorConfig {
            method: match i.method {
                MethodName::Dopri5 => Method::DormandPrince,
                MethodName::Rk4 => Method::Rk4,
            },
            rel_tol: i.rel_tol,
            abs_tol: i.abs_tol,
            max_step: i.max_step_ps,
            max_steps: i.max_steps,
            free_fast_path: i.free_fast_path,
        };
        integrator.validate().map_err(cfg)?;

        let t = &self.truncation;
        let dims = [t.b1, t.b2, t.stokes, t.anti_stokes];
        canonical_space(dims).map_err(cfg)?;

        Ok(RunConfig {
            system,
            detectors,
            delta_ts,
            herald_times,
            integrator,
            dims,
            out_dir: self.output.dir.clone(),
            svg: self.output.svg,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_builtin_parameter_set() {
        let cfg = RunConfig::default();
        let paper = SystemParams::<f64>::paper_defaults();
        assert!((cfg.system.lambda_ws - paper.lambda_ws).abs() < 1e-15);
        assert!((cfg.system.lambda_ra - paper.lambda_ra).abs() < 1e-15);
        assert!((cfg.system.theta - paper.theta).abs() < 1e-15);
        assert!((cfg.system.n_th - 0.04).abs() < 1e-15);
        for j in 0..2 {
            assert!((cfg.system.phonons[j].delta - paper.phonons[j].delta).abs() < 1e-12);
            assert!((cfg.system.phonons[j].beta - paper.phonons[j].beta).abs() < 1e-12);
            assert!((cfg.system.phonons[j].kappa - paper.phonons[j].kappa).abs() < 1e-12);
        }
        assert!((cfg.system.write.sigma - 0.085).abs() < 1e-15);
        assert_eq!(cfg.detectors, DetectorModel::paper_defaults());
        assert_eq!(cfg.dims, [3, 3, 3, 3]);
        assert_eq!(cfg.delta_ts.len(), 98);
        assert!((cfg.delta_ts[97] - 10.0).abs() < 1e-9);
        assert_eq!(cfg.herald_times.len(), 101);
    }

    #[test]
    fn reads_unit_suffixed_keys() {
        let cfg = RunConfig::from_toml_str(
            r#"
            [system]
            theta_rad = 0.0
            tau2_ps = 2.0
            [detectors]
            eta_s = 1.0
            [sweep]
            points_ps = [1.0, 2.5]
            [integrator]
            method = "rk4"
            max_step_ps = 0.002
            [truncation]
            b1 = 4
            "#,
        )
        .unwrap();
        assert_eq!(cfg.system.theta, 0.0);
        assert!((cfg.system.phonons[1].kappa - 0.5).abs() < 1e-15);
        assert_eq!(cfg.detectors.eta_s, 1.0);
        assert_eq!(cfg.delta_ts, vec![1.0, 2.5]);
        assert_eq!(cfg.integrator.method, Method::Rk4);
        assert_eq!(cfg.dims, [4, 3, 3, 3]);
    }

    #[test]
    fn rejects_bad_fields_before_running() {
        for text in [
            "[system]\nsigma_ps = 0.1\n",
            "[system]\nn_th = -1.0\n",
            "[detectors]\neta_a = 2.0\n",
            "[truncation]\nstokes = 1\n",
            "[integrator]\nabs_tol = 0.0\n",
            "[sweep]\nstep_ps = 0.0\n",
            "[system]\ndelta1_rad_per_ps = 1.0\n",
        ] {
            assert!(matches!(RunConfig::from_toml_str(text), Err(CliError::Config(_))), "{text}");
        }
    }
}
