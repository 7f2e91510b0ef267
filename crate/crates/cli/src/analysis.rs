//! Curve diagnostics: extrema, oscillation period, bi-exponential decay.

use isobeat::lsq::{levenberg_marquardt, LmConfig};
use nalgebra::DVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtremumKind {
    Max,
    Min,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extremum {
    pub t: f64,
    pub value: f64,
    pub kind: ExtremumKind,
}

/// Interior local extrema of a uniformly or non-uniformly sampled curve,
/// refined by a parabola through the three neighbouring samples.
pub fn extrema(series: &[(f64, f64)]) -> Vec<Extremum> {
    let mut out = Vec::new();
    for w in series.windows(3) {
        let [(x0, y0), (x1, y1), (x2, y2)] = [w[0], w[1], w[2]];
        let kind = if y1 > y0 && y1 >= y2 {
            ExtremumKind::Max
        } else if y1 < y0 && y1 <= y2 {
            ExtremumKind::Min
        } else {
            continue;
        };
        // vertex of p(t) = y0 + d01 (t − x0) + c (t − x0)(t − x1)
        let d01 = (y1 - y0) / (x1 - x0);
        let d12 = (y2 - y1) / (x2 - x1);
        let c = (d12 - d01) / (x2 - x0);
        let (t, value) = if c != 0.0 {
            let t = (0.5 * (x0 + x1) - d01 / (2.0 * c)).clamp(x0, x2);
            (t, y0 + d01 * (t - x0) + c * (t - x0) * (t - x1))
        } else {
            (x1, y1)
        };
        out.push(Extremum { t, value, kind });
    }
    out
}

/// Mean spacing of consecutive extrema of the same kind.
pub fn oscillation_period(ext: &[Extremum]) -> Option<f64> {
    let mut spacings = Vec::new();
    for kind in [ExtremumKind::Max, ExtremumKind::Min] {
        let ts: Vec<f64> = ext.iter().filter(|e| e.kind == kind).map(|e| e.t).collect();
        spacings.extend(ts.windows(2).map(|w| w[1] - w[0]));
    }
    (!spacings.is_empty()).then(|| spacings.iter().sum::<f64>() / spacings.len() as f64)
}

/// Mean displacement of `moved` extrema relative to the nearest same-kind
/// extremum of `reference`.
pub fn extrema_shift(reference: &[Extremum], moved: &[Extremum], max_distance: f64) -> Option<f64> {
    let shifts: Vec<f64> = moved
        .iter()
        .filter_map(|m| {
            reference
                .iter()
                .filter(|r| r.kind == m.kind)
                .map(|r| m.t - r.t)
                .filter(|d| d.abs() <= max_distance)
                .min_by(|a, b| a.abs().partial_cmp(&b.abs()).expect("finite"))
        })
        .collect();
    (!shifts.is_empty()).then(|| shifts.iter().sum::<f64>() / shifts.len() as f64)
}

pub fn is_strictly_decreasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] < w[0])
}

/// y = a₁e^{−t/τ₁} + a₂e^{−t/τ₂} with τ₁ ≥ τ₂.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiExponential {
    pub a_slow: f64,
    pub tau_slow: f64,
    pub a_fast: f64,
    pub tau_fast: f64,
    pub r_squared: f64,
}

impl BiExponential {
    pub fn eval(&self, t: f64) -> f64 {
        self.a_slow * (-t / self.tau_slow).exp() + self.a_fast * (-t / self.tau_fast).exp()
    }
}

/// Least-squares bi-exponential fit starting from time constants `guess`.
pub fn fit_biexponential(series: &[(f64, f64)], guess: (f64, f64)) -> Option<BiExponential> {
    if series.len() < 5 {
        return None;
    }
    let y0 = series[0].1;
    let t0 = series[0].0;
    let p0 = DVector::from_vec(vec![
        0.5 * y0 * (t0 / guess.0).exp(),
        guess.0.ln(),
        0.5 * y0 * (t0 / guess.1).exp(),
        guess.1.ln(),
    ]);
    let model = |p: &DVector<f64>| {
        DVector::from_iterator(
            series.len(),
            series.iter().map(|&(t, y)| p[0] * (-t / p[1].exp()).exp() + p[2] * (-t / p[3].exp()).exp() - y),
        )
    };
    let out = levenberg_marquardt(model, p0, &LmConfig::default()).ok()?;
    let p = out.params;
    let (mut slow, mut fast) = ((p[0], p[1].exp()), (p[2], p[3].exp()));
    if fast.1 > slow.1 {
        std::mem::swap(&mut slow, &mut fast);
    }
    let mean = series.iter().map(|s| s.1).sum::<f64>() / series.len() as f64;
    let ss_tot: f64 = series.iter().map(|s| (s.1 - mean).powi(2)).sum();
    Some(BiExponential {
        a_slow: slow.0,
        tau_slow: slow.1,
        a_fast: fast.0,
        tau_fast: fast.1,
        r_squared: 1.0 - 2.0 * out.cost / ss_tot,
    })
}
