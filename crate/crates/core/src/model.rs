//! Effective Hamiltonian and dissipators of the write/read Raman protocol.
//!
//! Everything is expressed in a frame co-rotating at the mean vibrational
//! frequency and at the Raman-resonant photon frequencies, with ħ = 1, time
//! in ps and frequencies in rad/ps. Only the beat between the two phonon
//! modes survives as a detuning (δ₁ = −δ₂ by default).

use std::f64::consts::PI;


use crate::error::{Error, Result};
use crate::hilbert::{mode_annihilation, mode_number, HilbertSpace, Op};
use crate::scalar::{polar, re, Real};

pub const MODE_B1: usize = 0;
pub const MODE_B2: usize = 1;
pub const MODE_S: usize = 2;
pub const MODE_A: usize = 3;

/// Half-width of a pulse integration window, in units of σ. The envelope is
/// below 2e-8 of its peak outside it.
pub const WINDOW_SIGMAS: f64 = 6.0;

/// Speed of light in cm/ps, for cm⁻¹ → THz.
pub const C_CM_PER_PS: f64 = 0.029_979_245_8;

/// The (b₁, b₂, a_S, a_A) space with the given per-mode truncation.
pub fn canonical_space(dims: [usize; 4]) -> Result<HilbertSpace> {
    HilbertSpace::new([("b1", dims[0]), ("b2", dims[1]), ("aS", dims[2]), ("aA", dims[3])])
}

/// Two-mode (b₁, b₂) space matching the phonon factor of a canonical space.
pub fn phonon_space(space: &HilbertSpace) -> Result<HilbertSpace> {
    space.subspace(&[MODE_B1, MODE_B2])
}

fn require_canonical(space: &HilbertSpace) -> Result<()> {
    if space.num_modes() != 4 {
        return Err(Error::WrongModeCount { expected: 4, got: space.num_modes() });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PulseRole {
    Write,
    Read,
}

/// Gaussian laser pulse; the optical carrier lives in the rotating frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSpec<T: Real> {
    /// Pulse center (ps).
    pub t0: T,
    /// Gaussian width σ of the field envelope (ps).
    pub sigma: T,
    pub role: PulseRole,
}

impl<T: Real> PulseSpec<T> {
    pub fn new(t0: T, sigma: T, role: PulseRole) -> Result<Self> {
        if !(sigma > T::zero()) {
            return Err(Error::InvalidParameter { name: "sigma", reason: format!("must be > 0, got {sigma}") });
        }
        Ok(Self { t0, sigma, role })
    }

    /// Gaussian width from an envelope FWHM.
    pub fn sigma_from_fwhm(fwhm: T) -> T {
        fwhm / (T::lit(2.0) * (T::lit(2.0) * T::ln_2()).sqrt())
    }

    pub fn fwhm(&self) -> T {
        T::lit(2.0) * (T::lit(2.0) * T::ln_2()).sqrt() * self.sigma
    }

    /// `[t0 - 6σ, t0 + 6σ]`.
    pub fn window(&self) -> (T, T) {
        let half = T::lit(WINDOW_SIGMAS) * self.sigma;
        (self.t0 - half, self.t0 + half)
    }

    pub fn envelope(&self, t: T) -> T {
        envelope(t, self)
    }
}

/// exp(−(t−t0)²/(2σ²)).
pub fn envelope<T: Real>(t: T, pulse: &PulseSpec<T>) -> T {
    let x = (t - pulse.t0) / pulse.sigma;
    (-(x * x) * T::lit(0.5)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhononMode<T: Real> {
    /// Detuning from the mean vibrational frequency (rad/ps).
    pub delta: T,
    /// Raman weight β.
    pub beta: T,
    /// Energy decay rate κ (1/ps).
    pub kappa: T,
}

impl<T: Real> PhononMode<T> {
    pub fn from_lifetime(delta: T, beta: T, tau_ps: T) -> Self {
        Self { delta, beta, kappa: T::one() / tau_ps }
    }

    /// τ = 1/κ (ps).
    pub fn tau(&self) -> T {
        T::one() / self.kappa
    }
}

/// Physical constants of the effective Hamiltonian and the thermal bath.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams<T: Real> {
    pub phonons: [PhononMode<T>; 2],
    /// Write-pulse Stokes coupling Λ^w_S (1/ps).
    pub lambda_ws: T,
    /// Read-pulse anti-Stokes coupling Λ^r_A (1/ps).
    pub lambda_ra: T,
    /// Four-wave-mixing coupling (1/ps).
    pub lambda_fwm: T,
    /// Total relative phase θ between the two phonon paths (rad).
    pub theta: T,
    /// Part of θ carried by the write term; the read term carries the rest.
    pub theta_write: T,
    pub n_th: T,
    pub write: PulseSpec<T>,
    pub read: PulseSpec<T>,
    /// Stokes / anti-Stokes photon detunings (rad/ps).
    pub delta_s: T,
    pub delta_a: T,
}

impl<T: Real> SystemParams<T> {
    /// Parameter set of the CS₂ isotope experiment: β₁² = 1/3, τ₁ = 8.4 ps,
    /// τ₂ = 1.7 ps, a 258 GHz beat, Λ^w_S = 0.104, Λ^r_A = 0.136,
    /// θ = π/6, n_th = 0.04 and σ = 0.085 ps pulses.
    pub fn paper_defaults() -> Self {
        let l = T::lit;
        let half_beat = l(PI * 0.258);
        let sigma = l(0.085);
        let theta = l(PI / 6.0);
        Self {
            phonons: [
                PhononMode::from_lifetime(half_beat, l((1.0f64 / 3.0).sqrt()), l(8.4)),
                PhononMode::from_lifetime(-half_beat, l((2.0f64 / 3.0).sqrt()), l(1.7)),
            ],
            lambda_ws: l(0.104),
            lambda_ra: l(0.136),
            lambda_fwm: T::zero(),
            theta,
            theta_write: theta,
            n_th: l(0.04),
            write: PulseSpec { t0: T::zero(), sigma, role: PulseRole::Write },
            read: PulseSpec { t0: l(2.0), sigma, role: PulseRole::Read },
            delta_s: T::zero(),
            delta_a: T::zero(),
        }
    }

    pub fn with_theta(mut self, theta: T) -> Self {
        self.theta = theta;
        self.theta_write = theta;
        self
    }

    /// Moves `theta_write` of the total phase onto the write term.
    pub fn with_theta_split(mut self, theta_write: T) -> Self {
        self.theta_write = theta_write;
        self
    }

    pub fn theta_read(&self) -> T {
        self.theta - self.theta_write
    }

    /// Single-pulse squeezing parameter r = Λ·√(2π)·σ of the write pulse.
    pub fn write_squeezing(&self) -> T {
        self.lambda_ws * T::two_pi().sqrt() * self.write.sigma
    }

    pub fn read_squeezing(&self) -> T {
        self.lambda_ra * T::two_pi().sqrt() * self.read.sigma
    }

    pub fn validate(&self) -> Result<()> {
        let [p1, p2] = &self.phonons;
        let norm = p1.beta * p1.beta + p2.beta * p2.beta;
        if (norm - T::one()).abs() > T::tolerance(1e-9) {
            return Err(Error::InvalidParameter {
                name: "beta",
                reason: format!("β₁² + β₂² = {norm}, expected 1"),
            });
        }
        for p in &self.phonons {
            if !(p.kappa > T::zero()) {
                return Err(Error::InvalidParameter { name: "kappa", reason: format!("must be > 0, got {}", p.kappa) });
            }
        }
        if !(self.n_th >= T::zero()) {
            return Err(Error::InvalidParameter { name: "n_th", reason: format!("must be >= 0, got {}", self.n_th) });
        }
        for pulse in [&self.write, &self.read] {
            if !(pulse.sigma > T::zero()) {
                return Err(Error::InvalidParameter { name: "sigma", reason: format!("must be > 0, got {}", pulse.sigma) });
            }
        }
        Ok(())
    }
}

/// Time-dependent prefactor of a Hamiltonian term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Drive<T: Real> {
    Constant,
    Pulse(PulseSpec<T>),
    PulseProduct(PulseSpec<T>, PulseSpec<T>),
}

impl<T: Real> Drive<T> {
    pub fn at(&self, t: T) -> T {
        match self {
            Drive::Constant => T::one(),
            Drive::Pulse(p) => p.envelope(t),
            Drive::PulseProduct(p, q) => p.envelope(t) * q.envelope(t),
        }
    }
}

/// H(t) = Σ_k f_k(t)·H_k with Hermitian H_k.
#[derive(Debug, Clone)]
pub struct HamiltonianTerms<T: Real> {
    pub terms: Vec<(Drive<T>, Op<T>)>,
}

impl<T: Real> HamiltonianTerms<T> {
    pub fn new(params: &SystemParams<T>, space: &HilbertSpace) -> Result<Self> {
        require_canonical(space)?;
        let b1 = mode_annihilation::<T>(space, MODE_B1)?;
        let b2 = mode_annihilation::<T>(space, MODE_B2)?;
        let a_s = mode_annihilation::<T>(space, MODE_S)?;
        let a_a = mode_annihilation::<T>(space, MODE_A)?;
        let [p1, p2] = params.phonons;

        let mut free = Op::zeros(space);
        for (mode, w) in [(MODE_B1, p1.delta), (MODE_B2, p2.delta), (MODE_S, params.delta_s), (MODE_A, params.delta_a)] {
            if w != T::zero() {
                free = &free + &mode_number::<T>(space, mode)?.scale(re(w));
            }
        }

        let phase = |theta: T| polar(T::one(), -theta);

        // Λ a_S† (β₁ b₁† + e^{-iθ_w} β₂ b₂†) + h.c.
        let stokes = &b1.dagger().scale(re(p1.beta)) + &b2.dagger().scale(phase(params.theta_write) * p2.beta);
        let write = hermitian_part(&(&a_s.dagger() * &stokes).scale(re(params.lambda_ws)));

        // Λ a_A† (β₁ b₁ + e^{-iθ_r} β₂ b₂) + h.c.
        let anti = &b1.scale(re(p1.beta)) + &b2.scale(phase(params.theta_read()) * p2.beta);
        let read = hermitian_part(&(&a_a.dagger() * &anti).scale(re(params.lambda_ra)));

        // Λ a_S a_A + h.c.
        let fwm = hermitian_part(&(&a_s * &a_a).scale(re(params.lambda_fwm)));

        let mut terms = vec![(Drive::Constant, free)];
        if params.lambda_ws != T::zero() {
            terms.push((Drive::Pulse(params.write), write));
        }
        if params.lambda_ra != T::zero() {
            terms.push((Drive::Pulse(params.read), read));
        }
        if params.lambda_fwm != T::zero() {
            terms.push((Drive::PulseProduct(params.write, params.read), fwm));
        }
        Ok(Self { terms })
    }

    pub fn at(&self, t: T) -> Op<T> {
        let mut iter = self.terms.iter();
        let (d0, h0) = iter.next().expect("free term always present");
        let mut h = h0.scale(re(d0.at(t)));
        for (drive, op) in iter {
            h = &h + &op.scale(re(drive.at(t)));
        }
        h
    }

    /// The drive-free part.
    pub fn free(&self) -> &Op<T> {
        &self.terms[0].1
    }
}

/// X + X†.
fn hermitian_part<T: Real>(x: &Op<T>) -> Op<T> {
    x + &x.dagger()
}

/// Effective Hamiltonian at time `t`.
pub fn hamiltonian_at<T: Real>(t: T, params: &SystemParams<T>, space: &HilbertSpace) -> Result<Op<T>> {
    Ok(HamiltonianTerms::new(params, space)?.at(t))
}

/// Thermal-bath jump operators √(κ(1+n_th))·b and √(κ·n_th)·b† of both
/// phonon modes. Channels with a vanishing rate are omitted.
pub fn collapse_operators<T: Real>(params: &SystemParams<T>, space: &HilbertSpace) -> Result<Vec<Op<T>>> {
    require_canonical(space)?;
    let mut ops = Vec::with_capacity(4);
    for (mode, phonon) in [(MODE_B1, &params.phonons[0]), (MODE_B2, &params.phonons[1])] {
        let b = mode_annihilation::<T>(space, mode)?;
        let down = phonon.kappa * (T::one() + params.n_th);
        let up = phonon.kappa * params.n_th;
        if down > T::zero() {
            ops.push(b.scale(re(down.sqrt())));
        }
        if up > T::zero() {
            ops.push(b.dagger().scale(re(up.sqrt())));
        }
    }
    Ok(ops)
}
