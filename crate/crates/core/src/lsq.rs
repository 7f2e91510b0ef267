//! Levenberg–Marquardt nonlinear least squares with a finite-difference
//! Jacobian.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmConfig<T: Real> {
    pub max_iterations: usize,
    /// Stop when an accepted step lowers the cost by less than this fraction.
    pub ftol: T,
    /// Stop when the step is this small relative to the parameters.
    pub xtol: T,
    /// Stop when the scaled gradient falls below this.
    pub gtol: T,
    pub initial_lambda: T,
}

impl<T: Real> Default for LmConfig<T> {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            ftol: T::tolerance(1e-12),
            xtol: T::tolerance(1e-10),
            gtol: T::tolerance(1e-12),
            initial_lambda: T::lit(1e-3),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmOutcome<T: Real> {
    pub params: DVector<T>,
    /// ½ Σ rᵢ².
    pub cost: T,
    pub iterations: usize,
    pub residuals: DVector<T>,
    /// s²·(JᵀJ)⁻¹ with s² = Σ rᵢ² / (m − n); `None` when singular or m ≤ n.
    pub covariance: Option<DMatrix<T>>,
}

impl<T: Real> LmOutcome<T> {
    pub fn std_error(&self, i: usize) -> Option<T> {
        self.covariance.as_ref().map(|c| c[(i, i)].max(T::zero()).sqrt())
    }
}

fn cost_of<T: Real>(r: &DVector<T>) -> T {
    r.norm_squared() * T::lit(0.5)
}

/// Central-difference Jacobian of `f` at `p`.
pub fn jacobian<T: Real, F>(f: &F, p: &DVector<T>, m: usize) -> DMatrix<T>
where
    F: Fn(&DVector<T>) -> DVector<T>,
{
    let step = T::default_epsilon().cbrt();
    let mut jac = DMatrix::zeros(m, p.len());
    let mut q = p.clone();
    for j in 0..p.len() {
        let h = step * (p[j].abs() + T::lit(1e-3));
        q[j] = p[j] + h;
        let up = f(&q);
        q[j] = p[j] - h;
        let down = f(&q);
        q[j] = p[j];
        jac.set_column(j, &((up - down) / (h + h)));
    }
    jac
}

/// Minimizes ½‖f(p)‖². Every accepted step strictly lowers the cost.
pub fn levenberg_marquardt<T: Real, F>(f: F, p0: DVector<T>, config: &LmConfig<T>) -> Result<LmOutcome<T>>
where
    F: Fn(&DVector<T>) -> DVector<T>,
{
    let n = p0.len();
    let mut p = p0;
    let mut r = f(&p);
    let m = r.len();
    if m == 0 || n == 0 {
        return Err(Error::InvalidParameter { name: "residuals", reason: "empty problem".into() });
    }
    if r.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter { name: "p0", reason: "residuals are not finite at the start point".into() });
    }
    let mut cost = cost_of(&r);
    let mut lambda = config.initial_lambda;
    let tiny = T::default_epsilon() * T::lit(1e3);

    for iter in 1..=config.max_iterations {
        let jac = jacobian(&f, &p, m);
        let jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * &r;
        let diag: Vec<T> = (0..n).map(|i| jtj[(i, i)].max(tiny)).collect();
        let scaled_grad = (0..n)
            .map(|i| grad[i].abs() / diag[i].sqrt())
            .fold(T::zero(), |a, b| a.max(b));
        if scaled_grad <= config.gtol * (cost + cost).sqrt().max(T::default_epsilon()) {
            return Ok(finish(p, cost, iter, r, &jac));
        }

        loop {
            let mut a = jtj.clone();
            for i in 0..n {
                a[(i, i)] += lambda * diag[i];
            }
            let Some(delta) = a.cholesky().map(|c| c.solve(&(-&grad))) else {
                lambda *= T::lit(10.0);
                if lambda > T::lit(1e16) {
                    return Err(not_converged(iter, cost, &p));
                }
                continue;
            };
            let trial = &p + &delta;
            let r_trial = f(&trial);
            let c_trial = cost_of(&r_trial);
            if c_trial.is_finite() && c_trial < cost {
                let reduction = (cost - c_trial) / cost;
                let small_step = delta.norm() <= config.xtol * (p.norm() + config.xtol);
                p = trial;
                r = r_trial;
                cost = c_trial;
                lambda = (lambda / T::lit(3.0)).max(T::lit(1e-12));
                if reduction < config.ftol || small_step || cost == T::zero() {
                    let jac = jacobian(&f, &p, m);
                    return Ok(finish(p, cost, iter, r, &jac));
                }
                break;
            }
            lambda *= T::lit(4.0);
            if lambda > T::lit(1e16) {
                // no downhill direction left: stationary to working precision
                return Ok(finish(p, cost, iter, r, &jac));
            }
        }
    }
    Err(not_converged(config.max_iterations, cost, &p))
}

fn not_converged<T: Real>(iterations: usize, cost: T, p: &DVector<T>) -> Error {
    Error::FitNotConverged { iterations, cost: cost.as_f64(), best: p.iter().map(|x| x.as_f64()).collect() }
}

fn finish<T: Real>(params: DVector<T>, cost: T, iterations: usize, residuals: DVector<T>, jac: &DMatrix<T>) -> LmOutcome<T> {
    let (m, n) = jac.shape();
    let covariance = (m > n)
        .then(|| (jac.transpose() * jac).try_inverse())
        .flatten()
        .map(|inv| inv * ((cost + cost) / T::from_usize(m - n).expect("small count")));
    LmOutcome { params, cost, iterations, residuals, covariance }
}
