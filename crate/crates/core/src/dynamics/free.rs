//! Closed-form propagation when no drive is active.
//!
//! Without drives the master equation factorizes into independent
//! single-mode generators (phase rotation plus thermal damping), so the
//! propagator over a time `t` is a product of local channels exp(L_k t),
//! each a d²×d² matrix.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::hilbert::{annihilation_op, number_op, HilbertSpace};
use crate::scalar::{im, CMatrix, Real};

/// Free dynamics of one mode: rotation at `freq` and coupling to a bath of
/// occupation `n_th` at energy decay rate `kappa`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeBath<T: Real> {
    pub freq: T,
    pub kappa: T,
    pub n_th: T,
}

impl<T: Real> ModeBath<T> {
    pub fn rotation(freq: T) -> Self {
        Self { freq, kappa: T::zero(), n_th: T::zero() }
    }

    fn is_trivial(&self) -> bool {
        self.freq == T::zero() && self.kappa == T::zero()
    }
}

/// Superoperator of one mode's free generator, acting on column-major
/// vectorized d×d matrices (`X[n, m]` ↦ index `n + d·m`).
pub fn local_generator<T: Real>(dim: usize, bath: &ModeBath<T>) -> Result<CMatrix<T>> {
    let b = annihilation_op::<T>(dim)?;
    let bd = b.adjoint();
    let num = number_op::<T>(dim)?;
    let bbd = &b * &bd;
    let half = T::lit(0.5);
    let down = bath.kappa * (T::one() + bath.n_th);
    let up = bath.kappa * bath.n_th;
    let mut sup = CMatrix::<T>::zeros(dim * dim, dim * dim);
    for m in 0..dim {
        for n in 0..dim {
            let mut x = CMatrix::<T>::zeros(dim, dim);
            x[(n, m)] = Complex::new(T::one(), T::zero());
            let mut lx = (&num * &x - &x * &num) * im(-bath.freq);
            if down > T::zero() {
                lx += (&b * &x * &bd - (&num * &x + &x * &num) * Complex::new(half, T::zero())).scale(down);
            }
            if up > T::zero() {
                lx += (&bd * &x * &b - (&bbd * &x + &x * &bbd) * Complex::new(half, T::zero())).scale(up);
            }
            let col = n + dim * m;
            for q in 0..dim {
                for p in 0..dim {
                    sup[(p + dim * q, col)] = lx[(p, q)];
                }
            }
        }
    }
    Ok(sup)
}

/// exp(L·t) for interaction-free evolution over a fixed duration.
#[derive(Debug, Clone)]
pub struct FreePropagator<T: Real> {
    space: HilbertSpace,
    channels: Vec<Option<CMatrix<T>>>,
}

impl<T: Real> FreePropagator<T> {
    pub fn new(space: &HilbertSpace, baths: &[ModeBath<T>], duration: T) -> Result<Self> {
        if baths.len() != space.num_modes() {
            return Err(Error::WrongModeCount { expected: space.num_modes(), got: baths.len() });
        }
        if duration < T::zero() {
            return Err(Error::InvalidParameter { name: "duration", reason: "must be >= 0".into() });
        }
        let channels = baths
            .iter()
            .zip(space.modes())
            .map(|(bath, mode)| {
                if bath.is_trivial() || duration == T::zero() {
                    Ok(None)
                } else {
                    Ok(Some((local_generator(mode.dim, bath)? * Complex::new(duration, T::zero())).exp()))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { space: space.clone(), channels })
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn apply(&self, rho: &CMatrix<T>) -> CMatrix<T> {
        let mut cur = rho.clone();
        for (mode, channel) in self.channels.iter().enumerate() {
            if let Some(s) = channel {
                cur = apply_local_channel(&cur, &self.space, mode, s);
            }
        }
        cur
    }
}

fn apply_local_channel<T: Real>(rho: &CMatrix<T>, space: &HilbertSpace, mode: usize, sup: &CMatrix<T>) -> CMatrix<T> {
    let d = space.modes()[mode].dim;
    let stride = space.stride(mode);
    let n = space.total_dim();
    let bases: Vec<usize> = (0..n).filter(|i| (i / stride) % d == 0).collect();
    let mut out = CMatrix::<T>::zeros(n, n);
    let mut x = vec![Complex::new(T::zero(), T::zero()); d * d];
    for &j0 in &bases {
        for &i0 in &bases {
            for q in 0..d {
                for p in 0..d {
                    x[p + d * q] = rho[(i0 + p * stride, j0 + q * stride)];
                }
            }
            for q in 0..d {
                for p in 0..d {
                    let row = p + d * q;
                    let mut acc = Complex::new(T::zero(), T::zero());
                    for (c, xv) in x.iter().enumerate() {
                        acc += sup[(row, c)] * *xv;
                    }
                    out[(i0 + p * stride, j0 + q * stride)] = acc;
                }
            }
        }
    }
    out
}
