//! Voigt fits of cw Raman spectra and the model parameters they imply.

use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::faddeeva::faddeeva;
use crate::lsq::{levenberg_marquardt, LmConfig};
use crate::model::{PhononMode, C_CM_PER_PS};
use crate::scalar::Real;

/// Counts on a strictly increasing Raman-shift grid (cm⁻¹).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum<T: Real> {
    shift: Vec<T>,
    counts: Vec<T>,
}

impl<T: Real> Spectrum<T> {
    pub fn new(shift: Vec<T>, counts: Vec<T>) -> Result<Self> {
        if shift.len() != counts.len() {
            return Err(Error::DimensionMismatch { expected: shift.len(), got: counts.len() });
        }
        if shift.len() < 2 {
            return Err(Error::InvalidParameter { name: "spectrum", reason: "needs at least two points".into() });
        }
        if let Some(i) = shift.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter {
                name: "shift",
                reason: format!("grid must be strictly increasing (point {})", i + 2),
            });
        }
        if let Some(i) = counts.iter().position(|c| !(*c >= T::zero())) {
            return Err(Error::InvalidParameter { name: "counts", reason: format!("point {} is negative or NaN", i + 1) });
        }
        Ok(Self { shift, counts })
    }

    /// Two delimited columns (shift, counts); blank lines and `#` comments
    /// are skipped. Errors cite 1-based line numbers.
    pub fn parse(text: &str) -> Result<Self> {
        let mut shift = Vec::new();
        let mut counts = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let fields: Vec<&str> = body
                .split(|c: char| c == ',' || c == ';' || c.is_whitespace())
                .filter(|f| !f.is_empty())
                .collect();
            if fields.len() != 2 {
                return Err(Error::Parse { line, reason: format!("expected 2 columns, found {}", fields.len()) });
            }
            let mut vals = [T::zero(); 2];
            for (v, f) in vals.iter_mut().zip(&fields) {
                let x: f64 = f.parse().map_err(|_| Error::Parse { line, reason: format!("`{f}` is not a number") })?;
                if !x.is_finite() {
                    return Err(Error::Parse { line, reason: format!("`{f}` is not finite") });
                }
                *v = T::lit(x);
            }
            if vals[1] < T::zero() {
                return Err(Error::Parse { line, reason: "negative counts".into() });
            }
            if let Some(&prev) = shift.last() {
                if !(vals[0] > prev) {
                    return Err(Error::Parse { line, reason: "shift values must be strictly increasing".into() });
                }
            }
            shift.push(vals[0]);
            counts.push(vals[1]);
        }
        Self::new(shift, counts)
    }

    pub fn shift(&self) -> &[T] {
        &self.shift
    }

    pub fn counts(&self) -> &[T] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.shift.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shift.is_empty()
    }

    pub fn range(&self) -> (T, T) {
        (self.shift[0], self.shift[self.shift.len() - 1])
    }

    /// Writes the two-column text format read by [`Spectrum::parse`].
    pub fn to_text(&self) -> String {
        let mut out = String::from("# shift_cm-1 counts\n");
        for (x, y) in self.shift.iter().zip(&self.counts) {
            out.push_str(&format!("{x} {y}\n"));
        }
        out
    }
}

/// One Raman line: Lorentzian of FWHM `gamma_l` convolved with a Gaussian
/// of standard deviation `sigma_g`, integrating to `area`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoigtPeak<T: Real> {
    pub center: T,
    pub gamma_l: T,
    pub sigma_g: T,
    pub area: T,
}

impl<T: Real> VoigtPeak<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_l > T::zero()) {
            return Err(Error::InvalidParameter { name: "gamma_l", reason: format!("must be > 0, got {}", self.gamma_l) });
        }
        if !(self.sigma_g >= T::zero()) {
            return Err(Error::InvalidParameter { name: "sigma_g", reason: format!("must be >= 0, got {}", self.sigma_g) });
        }
        if !(self.area > T::zero()) {
            return Err(Error::InvalidParameter { name: "area", reason: format!("must be > 0, got {}", self.area) });
        }
        Ok(())
    }

    pub fn eval(&self, x: T) -> T {
        voigt_eval(x, self)
    }
}

/// Voigt profile value at `x`, scaled by the peak area.
pub fn voigt_eval<T: Real>(x: T, peak: &VoigtPeak<T>) -> T {
    let hwhm = peak.gamma_l.abs() * T::lit(0.5);
    let dx = x - peak.center;
    let sigma = peak.sigma_g.abs();
    if sigma == T::zero() {
        return peak.area * hwhm / (T::pi() * (dx * dx + hwhm * hwhm));
    }
    let scale = sigma * T::lit(2.0f64.sqrt());
    let w = faddeeva(Complex::new(dx / scale, hwhm / scale));
    peak.area * w.re / (sigma * T::two_pi().sqrt())
}

/// Sum of peaks plus a constant offset on the given grid.
pub fn synthesize<T: Real>(peaks: &[VoigtPeak<T>], grid: &[T], baseline: T) -> Vec<T> {
    grid.iter()
        .map(|&x| peaks.iter().fold(baseline, |acc, p| acc + voigt_eval(x, p)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions<T: Real> {
    /// One instrument width for all peaks.
    pub shared_sigma: bool,
    /// Fit a constant background.
    pub baseline: bool,
    pub lm: LmConfig<T>,
}

impl<T: Real> Default for FitOptions<T> {
    fn default() -> Self {
        Self { shared_sigma: true, baseline: true, lm: LmConfig::default() }
    }
}

/// Standard errors of one fitted peak.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakErrors<T: Real> {
    pub center: T,
    pub gamma_l: T,
    pub sigma_g: T,
    pub area: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport<T: Real> {
    pub peaks: Vec<VoigtPeak<T>>,
    /// `None` when the covariance is singular.
    pub errors: Option<Vec<PeakErrors<T>>>,
    pub baseline: T,
    pub cost: T,
    pub iterations: usize,
    pub r_squared: T,
}

impl<T: Real> FitReport<T> {
    /// area / σ(area) per peak; zero when the uncertainty is unavailable.
    pub fn area_significance(&self) -> Vec<T> {
        match &self.errors {
            Some(errs) => self
                .peaks
                .iter()
                .zip(errs)
                .map(|(p, e)| if e.area > T::zero() { p.area / e.area } else { T::zero() })
                .collect(),
            None => vec![T::zero(); self.peaks.len()],
        }
    }

    /// Every area exceeds `k` standard errors.
    pub fn is_significant(&self, k: T) -> bool {
        self.area_significance().iter().all(|&s| s > k)
    }
}

struct Layout {
    peaks: usize,
    shared_sigma: bool,
    baseline: bool,
}

impl Layout {
    fn sigma_index(&self, peak: usize) -> usize {
        3 * self.peaks + if self.shared_sigma { 0 } else { peak }
    }

    fn len(&self) -> usize {
        3 * self.peaks + if self.shared_sigma { 1 } else { self.peaks } + usize::from(self.baseline)
    }

    fn peak<T: Real>(&self, p: &DVector<T>, k: usize) -> VoigtPeak<T> {
        VoigtPeak { center: p[3 * k], gamma_l: p[3 * k + 1].abs(), area: p[3 * k + 2], sigma_g: p[self.sigma_index(k)].abs() }
    }

    fn baseline<T: Real>(&self, p: &DVector<T>) -> T {
        if self.baseline {
            p[self.len() - 1]
        } else {
            T::zero()
        }
    }
}

/// Least-squares Voigt fit starting from `init`.
pub fn fit_voigt_peaks<T: Real>(spec: &Spectrum<T>, init: &[VoigtPeak<T>], options: &FitOptions<T>) -> Result<FitReport<T>> {
    if init.is_empty() {
        return Err(Error::InvalidParameter { name: "init", reason: "at least one initial guess is required".into() });
    }
    let (lo, hi) = spec.range();
    for g in init {
        if !(g.center >= lo && g.center <= hi) {
            return Err(Error::InvalidParameter {
                name: "init",
                reason: format!("guess center {} lies outside the grid [{lo}, {hi}]", g.center),
            });
        }
        g.validate()?;
    }
    let layout = Layout { peaks: init.len(), shared_sigma: options.shared_sigma, baseline: options.baseline };
    let mut p0 = DVector::zeros(layout.len());
    for (k, g) in init.iter().enumerate() {
        p0[3 * k] = g.center;
        p0[3 * k + 1] = g.gamma_l;
        p0[3 * k + 2] = g.area;
        p0[layout.sigma_index(k)] = g.sigma_g;
    }
    if options.shared_sigma {
        let n = T::from_usize(init.len()).expect("small count");
        p0[layout.sigma_index(0)] = init.iter().fold(T::zero(), |a, g| a + g.sigma_g) / n;
    }
    if options.baseline {
        p0[layout.len() - 1] = spec.counts().iter().copied().fold(T::max_value().unwrap_or(T::one()), |a, b| a.min(b));
    }

    let xs = spec.shift();
    let ys = spec.counts();
    let model = |p: &DVector<T>| {
        let peaks: Vec<VoigtPeak<T>> = (0..layout.peaks).map(|k| layout.peak(p, k)).collect();
        let base = layout.baseline(p);
        DVector::from_iterator(
            xs.len(),
            xs.iter().zip(ys).map(|(&x, &y)| peaks.iter().fold(base, |acc, pk| acc + voigt_eval(x, pk)) - y),
        )
    };
    let out = levenberg_marquardt(model, p0, &options.lm)?;

    let peaks: Vec<VoigtPeak<T>> = (0..layout.peaks).map(|k| layout.peak(&out.params, k)).collect();
    let errors = out.covariance.as_ref().map(|_| {
        (0..layout.peaks)
            .map(|k| {
                let se = |i: usize| out.std_error(i).unwrap_or(T::zero());
                PeakErrors { center: se(3 * k), gamma_l: se(3 * k + 1), area: se(3 * k + 2), sigma_g: se(layout.sigma_index(k)) }
            })
            .collect()
    });
    let n = T::from_usize(ys.len()).expect("small count");
    let mean = ys.iter().fold(T::zero(), |a, &b| a + b) / n;
    let ss_tot = ys.iter().fold(T::zero(), |a, &y| a + (y - mean) * (y - mean));
    let ss_res = out.cost + out.cost;
    let r_squared = if ss_tot > T::zero() { T::one() - ss_res / ss_tot } else { T::zero() };
    Ok(FitReport { peaks, errors, baseline: layout.baseline(&out.params), cost: out.cost, iterations: out.iterations, r_squared })
}

/// Model parameters implied by the two main Raman lines. Index 0 is the
/// higher-frequency line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedParams<T: Real> {
    pub beta: [T; 2],
    /// Detunings about the mean line position (rad/ps).
    pub delta: [T; 2],
    /// Energy decay rates κ = 2πΔν (1/ps).
    pub kappa: [T; 2],
    /// κ = 2Γ holds only without pure dephasing; always set.
    pub assumes_no_pure_dephasing: bool,
}

impl<T: Real> DerivedParams<T> {
    pub fn tau(&self) -> [T; 2] {
        [T::one() / self.kappa[0], T::one() / self.kappa[1]]
    }

    /// Beat frequency |δ₁ − δ₂| / 2π in THz.
    pub fn beat_thz(&self) -> T {
        (self.delta[0] - self.delta[1]).abs() / T::two_pi()
    }

    pub fn phonon_modes(&self) -> [PhononMode<T>; 2] {
        [0, 1].map(|j| PhononMode { delta: self.delta[j], beta: self.beta[j], kappa: self.kappa[j] })
    }
}

/// cm⁻¹ → THz.
pub fn wavenumber_to_thz<T: Real>(k: T) -> T {
    k * T::lit(C_CM_PER_PS)
}

/// Weights from areas, detunings from centers and decay rates from
/// Lorentzian widths.
pub fn derive_model_params<T: Real>(peaks: &[VoigtPeak<T>; 2]) -> Result<DerivedParams<T>> {
    for p in peaks {
        p.validate()?;
    }
    if peaks[0].center == peaks[1].center {
        return Err(Error::InvalidParameter { name: "center", reason: "the two peaks share a center".into() });
    }
    let (hi, lo) = if peaks[0].center > peaks[1].center { (peaks[0], peaks[1]) } else { (peaks[1], peaks[0]) };
    let total = hi.area + lo.area;
    let mean = (hi.center + lo.center) * T::lit(0.5);
    let two_pi = T::lit(2.0 * PI);
    let detuning = |c: T| two_pi * wavenumber_to_thz(c - mean);
    let kappa = |p: &VoigtPeak<T>| two_pi * wavenumber_to_thz(p.gamma_l);
    Ok(DerivedParams {
        beta: [(hi.area / total).sqrt(), (lo.area / total).sqrt()],
        delta: [detuning(hi.center), detuning(lo.center)],
        kappa: [kappa(&hi), kappa(&lo)],
        assumes_no_pure_dephasing: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn peak(center: f64, gamma_l: f64, sigma_g: f64, area: f64) -> VoigtPeak<f64> {
        VoigtPeak { center, gamma_l, sigma_g, area }
    }

    fn trapezoid(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        (0..=n).map(|i| f(a + i as f64 * h) * if i == 0 || i == n { 0.5 } else { 1.0 }).sum::<f64>() * h
    }

    #[test]
    fn lorentzian_limit_peak_height() {
        let p = peak(650.0, 0.632, 0.0, 2.0);
        assert!((p.eval(650.0) - 2.0 * 2.0 / (PI * 0.632)).abs() < 1e-12);
        // a tiny Gaussian width barely changes it
        let q = peak(650.0, 0.632, 1e-6, 2.0);
        assert!((q.eval(650.0) / p.eval(650.0) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn gaussian_limit() {
        let p = peak(0.0, 1e-9, 0.7, 3.0);
        let g = |x: f64| 3.0 * (-x * x / (2.0 * 0.49)).exp() / (0.7 * (2.0 * PI).sqrt());
        for &x in &[0.0, 0.3, 1.0, 2.0] {
            assert!((p.eval(x) - g(x)).abs() < 1e-8, "x = {x}");
        }
    }

    #[test]
    fn integrates_to_area() {
        let p = peak(650.0, 0.632, 0.5, 1.7);
        // Lorentzian tails beyond ±L carry 2·(γ/2)/(πL) of the area
        let half = 4000.0;
        let tail = 2.0 * 0.316 / (PI * half);
        let integral = trapezoid(|x| p.eval(x), 650.0 - half, 650.0 + half, 4_000_000);
        assert!(((integral + 1.7 * tail) / 1.7 - 1.0).abs() < 1e-4);
    }

    #[test]
    fn voigt_matches_direct_convolution() {
        let p = peak(0.0, 0.8, 0.4, 1.0);
        let lor = |x: f64| 0.4 / (PI * (x * x + 0.16));
        let gau = |x: f64| (-x * x / 0.32).exp() / (0.4 * (2.0 * PI).sqrt());
        for &x in &[0.0, 0.5, 1.5] {
            let conv = trapezoid(|s| gau(s) * lor(x - s), -6.0, 6.0, 24_000);
            assert!((p.eval(x) - conv).abs() < 1e-8, "x = {x}");
        }
    }

    #[test]
    fn parse_reports_line_numbers() {
        let text = "# header\n640.0, 1.0\n640.5 2.0\n\n641.0\t3.0 # tail\n";
        let s = Spectrum::<f64>::parse(text).unwrap();
        assert_eq!(s.shift(), &[640.0, 640.5, 641.0]);
        let bad = "640 1\n641 x\n";
        assert_eq!(Spectrum::<f64>::parse(bad).unwrap_err(), Error::Parse { line: 2, reason: "`x` is not a number".into() });
        let mut lines: Vec<String> = (0..20).map(|i| format!("{} 1.0", 600 + i)).collect();
        lines[16] = "616 1.0 2.0".into();
        match Spectrum::<f64>::parse(&lines.join("\n")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 17),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(Spectrum::<f64>::parse("1 1\n1 2\n"), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn text_round_trip() {
        let s = Spectrum::new(vec![1.0, 2.5, 3.0], vec![0.0, 4.25, 1e-3]).unwrap();
        assert_eq!(Spectrum::<f64>::parse(&s.to_text()).unwrap(), s);
    }

    #[test]
    fn exact_lorentzian_recovery() {
        let truth = peak(650.0, 0.9, 0.0, 2.0);
        let grid: Vec<f64> = (0..400).map(|i| 640.0 + i as f64 * 0.05).collect();
        let counts = synthesize(&[truth], &grid, 0.0);
        let spec = Spectrum::new(grid, counts).unwrap();
        let opts = FitOptions { baseline: false, ..FitOptions::default() };
        let fit = fit_voigt_peaks(&spec, &[peak(649.6, 1.3, 0.0, 1.5)], &opts).unwrap();
        let got = fit.peaks[0];
        assert!((got.center - 650.0).abs() < 1e-8);
        assert!((got.gamma_l - 0.9).abs() < 1e-8);
        assert!((got.area - 2.0).abs() < 1e-8);
        assert!(got.sigma_g < 1e-4);
    }

    #[test]
    fn flat_spectrum_is_not_a_confident_fit() {
        let grid: Vec<f64> = (0..200).map(|i| 640.0 + i as f64 * 0.1).collect();
        // small deterministic ripple so the covariance is defined
        let counts: Vec<f64> = (0..200).map(|i| 1.0 + 0.01 * ((i * 7919) % 13) as f64 / 13.0).collect();
        let spec = Spectrum::new(grid, counts).unwrap();
        match fit_voigt_peaks(&spec, &[peak(650.0, 1.0, 0.3, 1.0)], &FitOptions::default()) {
            Ok(fit) => assert!(!fit.is_significant(3.0), "significance {:?}", fit.area_significance()),
            Err(e) => assert!(matches!(e, Error::FitNotConverged { .. })),
        }
    }

    #[test]
    fn guesses_outside_grid_are_rejected() {
        let spec = Spectrum::new(vec![640.0, 641.0, 642.0], vec![1.0, 2.0, 1.0]).unwrap();
        assert!(fit_voigt_peaks(&spec, &[peak(700.0, 1.0, 0.3, 1.0)], &FitOptions::default()).is_err());
        assert!(fit_voigt_peaks(&spec, &[], &FitOptions::default()).is_err());
    }

    #[test]
    fn derived_parameters_of_the_cs2_lines() {
        let d = derive_model_params(&[peak(646.7, 3.123, 0.5, 1.0), peak(655.3, 0.632, 0.5, 0.5)]).unwrap();
        assert!((d.beta[0] - (1.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((d.beta[1] - (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((d.beta[0] - 0.5774).abs() < 1e-4 && (d.beta[1] - 0.8165).abs() < 1e-4);
        assert!((d.beta[0].powi(2) + d.beta[1].powi(2) - 1.0).abs() < 1e-12);
        let [t1, t2] = d.tau();
        assert!((t1 / 8.4 - 1.0).abs() < 0.02, "tau1 = {t1}");
        assert!((t2 / 1.7 - 1.0).abs() < 0.02, "tau2 = {t2}");
        assert!((d.beat_thz() - 0.2578).abs() < 1e-4);
        assert!(d.delta[0] > 0.0 && (d.delta[0] + d.delta[1]).abs() < 1e-12);
        assert!(d.assumes_no_pure_dephasing);
    }

    #[test]
    fn derived_parameters_reject_identical_centers() {
        assert!(derive_model_params(&[peak(650.0, 1.0, 0.0, 1.0), peak(650.0, 2.0, 0.0, 1.0)]).is_err());
    }

    #[test]
    fn derived_beta_is_scale_free_and_order_free() {
        let a = [peak(646.7, 3.0, 0.5, 1.0), peak(655.3, 0.6, 0.5, 0.5)];
        let b = [peak(655.3, 0.6, 0.5, 5.0), peak(646.7, 3.0, 0.5, 10.0)];
        let (da, db) = (derive_model_params(&a).unwrap(), derive_model_params(&b).unwrap());
        assert!((da.beta[0] - db.beta[0]).abs() < 1e-14);
        assert_eq!(da.kappa, db.kappa);
    }
}
