//! Explicit Runge–Kutta steppers for matrix-valued linear ODEs.

use nalgebra::ComplexField;

use crate::error::{Error, Result};
use crate::scalar::{CMatrix, Real};

/// Integration scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Classic fourth-order Runge–Kutta with step `max_step`.
    Rk4,
    /// Dormand–Prince 5(4) with error control.
    DormandPrince,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig<T: Real> {
    pub method: Method,
    pub rel_tol: T,
    pub abs_tol: T,
    /// Largest step (ps); the fixed step for [`Method::Rk4`].
    pub max_step: T,
    /// Budget of attempted steps per call before giving up.
    pub max_steps: usize,
    /// Skip interaction-free gaps with the closed-form propagator.
    pub free_fast_path: bool,
}

impl<T: Real> Default for IntegratorConfig<T> {
    fn default() -> Self {
        Self {
            method: Method::DormandPrince,
            rel_tol: T::lit(1e-8),
            abs_tol: T::lit(1e-10),
            max_step: T::lit(0.25),
            max_steps: 2_000_000,
            free_fast_path: true,
        }
    }
}

impl<T: Real> IntegratorConfig<T> {
    pub fn rk4(step: T) -> Self {
        Self { method: Method::Rk4, max_step: step, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: T| {
            if v > T::zero() {
                Ok(())
            } else {
                Err(Error::InvalidParameter { name, reason: format!("must be > 0, got {v}") })
            }
        };
        positive("rel_tol", self.rel_tol)?;
        positive("abs_tol", self.abs_tol)?;
        positive("max_step", self.max_step)
    }
}

/// Counters from one integration call.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

/// Advances `y` from `t0` to `t1` under `dy/dt = f(t, y)`.
pub fn integrate<T, F>(
    mut f: F,
    y: &mut CMatrix<T>,
    t0: T,
    t1: T,
    config: &IntegratorConfig<T>,
) -> Result<StepStats>
where
    T: Real,
    F: FnMut(T, &CMatrix<T>, &mut CMatrix<T>),
{
    config.validate()?;
    if !(t1 > t0) {
        return Ok(StepStats::default());
    }
    match config.method {
        Method::Rk4 => rk4(&mut f, y, t0, t1, config),
        Method::DormandPrince => dopri5(&mut f, y, t0, t1, config),
    }
}

fn axpy<T: Real>(out: &mut CMatrix<T>, base: &CMatrix<T>, terms: &[(T, &CMatrix<T>)]) {
    out.copy_from(base);
    let o = out.as_mut_slice();
    for (c, k) in terms {
        if *c == T::zero() {
            continue;
        }
        for (oi, ki) in o.iter_mut().zip(k.as_slice()) {
            *oi += ki.scale(*c);
        }
    }
}

fn rk4<T, F>(f: &mut F, y: &mut CMatrix<T>, t0: T, t1: T, config: &IntegratorConfig<T>) -> Result<StepStats>
where
    T: Real,
    F: FnMut(T, &CMatrix<T>, &mut CMatrix<T>),
{
    let span = t1 - t0;
    let steps = (span / config.max_step).ceil().to_usize().unwrap_or(usize::MAX).max(1);
    if steps > config.max_steps {
        return Err(Error::Integration { t: t0.as_f64(), reason: format!("{steps} RK4 steps exceed the budget") });
    }
    let h = span / T::lit(steps as f64);
    let (n, m) = y.shape();
    let mut k1 = CMatrix::zeros(n, m);
    let mut k2 = CMatrix::zeros(n, m);
    let mut k3 = CMatrix::zeros(n, m);
    let mut k4 = CMatrix::zeros(n, m);
    let mut tmp = CMatrix::zeros(n, m);
    let half = T::lit(0.5);
    let sixth = h / T::lit(6.0);
    for s in 0..steps {
        let t = t0 + h * T::lit(s as f64);
        f(t, y, &mut k1);
        axpy(&mut tmp, y, &[(h * half, &k1)]);
        f(t + h * half, &tmp, &mut k2);
        axpy(&mut tmp, y, &[(h * half, &k2)]);
        f(t + h * half, &tmp, &mut k3);
        axpy(&mut tmp, y, &[(h, &k3)]);
        f(t + h, &tmp, &mut k4);
        axpy(&mut tmp, y, &[(sixth, &k1), (sixth * T::lit(2.0), &k2), (sixth * T::lit(2.0), &k3), (sixth, &k4)]);
        std::mem::swap(y, &mut tmp);
    }
    Ok(StepStats { accepted: steps, rejected: 0, rhs_evals: 4 * steps })
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
const A6: [f64; 5] = [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0];
const B: [f64; 6] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0];
// b - b̂
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

fn dopri5<T, F>(f: &mut F, y: &mut CMatrix<T>, t0: T, t1: T, config: &IntegratorConfig<T>) -> Result<StepStats>
where
    T: Real,
    F: FnMut(T, &CMatrix<T>, &mut CMatrix<T>),
{
    let (n, m) = y.shape();
    let mut k: Vec<CMatrix<T>> = (0..7).map(|_| CMatrix::zeros(n, m)).collect();
    let mut stage = CMatrix::zeros(n, m);
    let mut y_new = CMatrix::zeros(n, m);
    let mut stats = StepStats::default();

    let span = t1 - t0;
    let mut h = config.max_step.min(span).min(T::lit(1e-3).max(span * T::lit(1e-4)));
    let h_floor = T::default_epsilon() * T::lit(64.0) * (t0.abs().max(t1.abs()).max(T::one()));
    let mut t = t0;

    f(t, y, &mut k[0]);
    stats.rhs_evals += 1;

    let l = T::lit;
    while t < t1 {
        if stats.accepted + stats.rejected >= config.max_steps {
            return Err(Error::Integration {
                t: t.as_f64(),
                reason: format!("step budget of {} exhausted (h = {:e})", config.max_steps, h.as_f64()),
            });
        }
        let last = t + h >= t1;
        if last {
            h = t1 - t;
        }
        {
            let (k0, rest) = k.split_at_mut(1);
            let k0 = &k0[0];
            axpy(&mut stage, y, &[(h * l(A2[0]), k0)]);
            f(t + h * l(C[1]), &stage, &mut rest[0]);
        }
        axpy(&mut stage, y, &[(h * l(A3[0]), &k[0]), (h * l(A3[1]), &k[1])]);
        f(t + h * l(C[2]), &stage, &mut k[2]);
        axpy(&mut stage, y, &[(h * l(A4[0]), &k[0]), (h * l(A4[1]), &k[1]), (h * l(A4[2]), &k[2])]);
        f(t + h * l(C[3]), &stage, &mut k[3]);
        axpy(
            &mut stage,
            y,
            &[(h * l(A5[0]), &k[0]), (h * l(A5[1]), &k[1]), (h * l(A5[2]), &k[2]), (h * l(A5[3]), &k[3])],
        );
        f(t + h * l(C[4]), &stage, &mut k[4]);
        axpy(
            &mut stage,
            y,
            &[
                (h * l(A6[0]), &k[0]),
                (h * l(A6[1]), &k[1]),
                (h * l(A6[2]), &k[2]),
                (h * l(A6[3]), &k[3]),
                (h * l(A6[4]), &k[4]),
            ],
        );
        f(t + h * l(C[5]), &stage, &mut k[5]);
        axpy(
            &mut y_new,
            y,
            &[
                (h * l(B[0]), &k[0]),
                (h * l(B[2]), &k[2]),
                (h * l(B[3]), &k[3]),
                (h * l(B[4]), &k[4]),
                (h * l(B[5]), &k[5]),
            ],
        );
        f(t + h, &y_new, &mut k[6]);
        stats.rhs_evals += 6;

        // scaled max-norm of the embedded error estimate
        let mut err = T::zero();
        {
            let ys = y.as_slice();
            let yn = y_new.as_slice();
            let ks: Vec<&[_]> = k.iter().map(|x| x.as_slice()).collect();
            for i in 0..ys.len() {
                let mut e = ks[0][i].scale(l(E[0]));
                for s in 2..7 {
                    e += ks[s][i].scale(l(E[s]));
                }
                let scale = config.abs_tol + config.rel_tol * ys[i].modulus().max(yn[i].modulus());
                err = err.max(e.modulus() * h / scale);
            }
        }
        if !err.is_finite() {
            return Err(Error::Integration { t: t.as_f64(), reason: "non-finite error estimate".into() });
        }

        if err <= T::one() {
            t = if last { t1 } else { t + h };
            std::mem::swap(y, &mut y_new);
            k.swap(0, 6);
            stats.accepted += 1;
            let grow = if err == T::zero() { l(5.0) } else { (l(0.9) * err.powf(l(-0.2))).min(l(5.0)) };
            h = (h * grow).min(config.max_step);
        } else {
            stats.rejected += 1;
            h *= (l(0.9) * err.powf(l(-0.2))).max(l(0.2));
            if h < h_floor {
                return Err(Error::Integration {
                    t: t.as_f64(),
                    reason: format!("step size underflow (h = {:e}, error ratio {:e})", h.as_f64(), err.as_f64()),
                });
            }
        }
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex;

    // y' = i·w·y + (−g)·y  → y(t) = exp((iw − g) t)
    fn run(config: IntegratorConfig<f64>) -> (Complex<f64>, StepStats) {
        let (w, g) = (3.0, 0.4);
        let rate = Complex::new(-g, w);
        let mut y = CMatrix::<f64>::from_element(1, 1, Complex::new(1.0, 0.0));
        let stats = integrate(|_, y, dy| dy[(0, 0)] = rate * y[(0, 0)], &mut y, 0.0, 2.0, &config).unwrap();
        (y[(0, 0)], stats)
    }

    #[test]
    fn both_methods_match_exponential() {
        let exact = (Complex::new(-0.4, 3.0) * 2.0).exp();
        let (y, _) = run(IntegratorConfig::rk4(1e-3));
        assert!((y - exact).norm() < 1e-11);
        let (y, stats) = run(IntegratorConfig::default());
        assert!((y - exact).norm() < 1e-7, "{}", (y - exact).norm());
        assert!(stats.accepted > 0);
    }

    #[test]
    fn rk4_is_fourth_order() {
        let exact = (Complex::new(-0.4, 3.0) * 2.0).exp();
        let (a, _) = run(IntegratorConfig::rk4(0.02));
        let (b, _) = run(IntegratorConfig::rk4(0.01));
        let ratio = (a - exact).norm() / (b - exact).norm();
        assert!((ratio - 16.0).abs() < 1.5, "ratio {ratio}");
    }

    #[test]
    fn time_dependent_rhs_hits_endpoint() {
        // y' = 2t → y(1) = 1
        let mut y = CMatrix::<f64>::zeros(1, 1);
        integrate(|t, _, dy| dy[(0, 0)] = Complex::new(2.0 * t, 0.0), &mut y, 0.0, 1.0, &IntegratorConfig::default())
            .unwrap();
        assert!((y[(0, 0)].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let config = IntegratorConfig { max_steps: 3, ..IntegratorConfig::default() };
        let mut y = CMatrix::<f64>::from_element(1, 1, Complex::new(1.0, 0.0));
        let err = integrate(|_, y, dy| dy[(0, 0)] = y[(0, 0)] * 50.0, &mut y, 0.0, 10.0, &config).unwrap_err();
        assert!(matches!(err, Error::Integration { .. }));
    }

    #[test]
    fn invalid_tolerances_are_rejected() {
        let config = IntegratorConfig { abs_tol: 0.0, ..IntegratorConfig::<f64>::default() };
        assert!(config.validate().is_err());
    }
}
