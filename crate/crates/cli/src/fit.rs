//! Voigt fit of a measured spectrum and the run parameters it implies.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use isobeat::spectra::{derive_model_params, fit_voigt_peaks, DerivedParams, FitOptions, FitReport, Spectrum, VoigtPeak};

use crate::error::CliError;

/// Initial guess `CENTER[,GAMMA_L[,SIGMA_G[,AREA]]]` in cm⁻¹; the area
/// defaults to an estimate from the peak height.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Guess {
    pub center: f64,
    pub gamma_l: f64,
    pub sigma_g: f64,
    pub area: Option<f64>,
}

impl std::str::FromStr for Guess {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let vals: Vec<f64> = s
            .split(',')
            .map(|f| f.trim().parse::<f64>().map_err(|_| format!("`{f}` is not a number in guess `{s}`")))
            .collect::<Result<_, _>>()?;
        if vals.is_empty() || vals.len() > 4 {
            return Err(format!("guess `{s}` must be CENTER[,GAMMA_L[,SIGMA_G[,AREA]]]"));
        }
        Ok(Self {
            center: vals[0],
            gamma_l: vals.get(1).copied().unwrap_or(1.0),
            sigma_g: vals.get(2).copied().unwrap_or(0.3),
            area: vals.get(3).copied(),
        })
    }
}

impl Guess {
    fn to_peak(self, spec: &Spectrum<f64>) -> VoigtPeak<f64> {
        let area = self.area.unwrap_or_else(|| {
            let floor = spec.counts().iter().copied().fold(f64::INFINITY, f64::min);
            let nearest = spec
                .shift()
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1 - self.center).abs().partial_cmp(&(b.1 - self.center).abs()).expect("finite"))
                .map(|(i, _)| spec.counts()[i])
                .unwrap_or(floor);
            // Lorentzian height ↔ area
            let est = (nearest - floor) * std::f64::consts::PI * 0.5 * self.gamma_l.max(1e-6);
            if est > 0.0 { est } else { 1.0 }
        });
        VoigtPeak { center: self.center, gamma_l: self.gamma_l, sigma_g: self.sigma_g, area }
    }
}

pub fn load_spectrum(path: &Path) -> Result<Spectrum<f64>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read spectrum {}: {e}", path.display())))?;
    Spectrum::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub source: PathBuf,
    pub points: usize,
    pub shared_sigma: bool,
    pub report: FitReport<f64>,
    /// From the two largest-area peaks, when there are at least two.
    pub derived: Option<DerivedParams<f64>>,
}

pub fn run_fit(source: &Path, spec: &Spectrum<f64>, guesses: &[Guess], options: &FitOptions<f64>) -> Result<FitOutcome, CliError> {
    if guesses.is_empty() {
        return Err(CliError::Usage("at least one --guess is required".into()));
    }
    let init: Vec<VoigtPeak<f64>> = guesses.iter().map(|g| g.to_peak(spec)).collect();
    let report = fit_voigt_peaks(spec, &init, options)?;
    let derived = if report.peaks.len() >= 2 {
        let mut by_area = report.peaks.clone();
        by_area.sort_by(|a, b| b.area.partial_cmp(&a.area).expect("finite areas"));
        Some(derive_model_params(&[by_area[0], by_area[1]])?)
    } else {
        None
    };
    Ok(FitOutcome { source: source.to_path_buf(), points: spec.len(), shared_sigma: options.shared_sigma, report, derived })
}

impl FitOutcome {
    pub fn report_text(&self) -> String {
        let r = &self.report;
        let mut s = String::new();
        let _ = writeln!(s, "source: {}", self.source.display());
        let _ = writeln!(s, "points: {}", self.points);
        let _ = writeln!(s, "iterations: {}", r.iterations);
        let _ = writeln!(s, "r_squared: {:.6}", r.r_squared);
        let _ = writeln!(s, "baseline: {:.6e}", r.baseline);
        let _ = writeln!(s, "shared_sigma_g: {}", self.shared_sigma);
        let _ = writeln!(s);
        let _ = writeln!(s, "peak center_cm-1 gamma_l_cm-1 sigma_g_cm-1 area area_over_stderr");
        let significance = r.area_significance();
        for (k, p) in r.peaks.iter().enumerate() {
            let err = r.errors.as_ref().map(|e| e[k]);
            let pm = |v: f64, e: Option<f64>| match e {
                Some(e) => format!("{v:.4}±{e:.4}"),
                None => format!("{v:.4}"),
            };
            let _ = writeln!(
                s,
                "{} {} {} {} {} {:.1}",
                k + 1,
                pm(p.center, err.map(|e| e.center)),
                pm(p.gamma_l, err.map(|e| e.gamma_l)),
                pm(p.sigma_g, err.map(|e| e.sigma_g)),
                pm(p.area, err.map(|e| e.area)),
                significance[k]
            );
        }
        if !r.is_significant(3.0) {
            let _ = writeln!(s, "warning: some peak areas are within 3 standard errors of zero");
        }
        if let Some(d) = &self.derived {
            let [t1, t2] = d.tau();
            let _ = writeln!(s);
            let _ = writeln!(s, "derived (mode 1 = higher-frequency line; kappa = 2*gamma assumes no pure dephasing)");
            let _ = writeln!(s, "beta1: {:.4}", d.beta[0]);
            let _ = writeln!(s, "beta2: {:.4}", d.beta[1]);
            let _ = writeln!(s, "delta1_rad_per_ps: {:.5}", d.delta[0]);
            let _ = writeln!(s, "delta2_rad_per_ps: {:.5}", d.delta[1]);
            let _ = writeln!(s, "kappa1_per_ps: {:.5}", d.kappa[0]);
            let _ = writeln!(s, "kappa2_per_ps: {:.5}", d.kappa[1]);
            let _ = writeln!(s, "tau1_ps: {t1:.3}");
            let _ = writeln!(s, "tau2_ps: {t2:.3}");
            let _ = writeln!(s, "beat_ghz: {:.2}", d.beat_thz() * 1e3);
        }
        s
    }

    /// `[system]` keys for a run config.
    pub fn config_fragment(&self) -> Option<String> {
        let d = self.derived.as_ref()?;
        let [t1, t2] = d.tau();
        Some(format!(
            "# fitted from {}\n[system]\nbeta1 = {}\ntau1_ps = {}\ntau2_ps = {}\ndelta1_rad_per_ps = {}\ndelta2_rad_per_ps = {}\n",
            self.source.display(),
            d.beta[0],
            t1,
            t2,
            d.delta[0],
            d.delta[1]
        ))
    }
}
