//! Noisy photon detection, coincidences, heralding and entanglement.

use num_complex::Complex;

use crate::dynamics::{FreePropagator, ModeBath};
use crate::error::{Error, Result};
use crate::hilbert::{
    partial_trace, partial_transpose, real_diagonal, trace_norm, trace_of_product, DensityMatrix, HilbertSpace, Op,
};
use crate::model::{SystemParams, MODE_A, MODE_B1, MODE_B2, MODE_S};
use crate::scalar::{CMatrix, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Stokes,
    AntiStokes,
}

impl Channel {
    pub fn mode(self) -> usize {
        match self {
            Channel::Stokes => MODE_S,
            Channel::AntiStokes => MODE_A,
        }
    }
}

/// Click model of the two single-photon detectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorModel<T: Real> {
    pub eta_s: T,
    pub eta_a: T,
    /// Dark-count probability per detection window.
    pub pdc_s: T,
    pub pdc_a: T,
}

impl<T: Real> DetectorModel<T> {
    /// η = 0.1 on both channels, p_dc = 2e-4 (Stokes) and 1e-5 (anti-Stokes).
    pub fn paper_defaults() -> Self {
        Self { eta_s: T::lit(0.1), eta_a: T::lit(0.1), pdc_s: T::lit(2e-4), pdc_a: T::lit(1e-5) }
    }

    /// Unit efficiency, no dark counts.
    pub fn ideal() -> Self {
        Self { eta_s: T::one(), eta_a: T::one(), pdc_s: T::zero(), pdc_a: T::zero() }
    }

    pub fn efficiency(&self, channel: Channel) -> T {
        match channel {
            Channel::Stokes => self.eta_s,
            Channel::AntiStokes => self.eta_a,
        }
    }

    pub fn dark_count(&self, channel: Channel) -> T {
        match channel {
            Channel::Stokes => self.pdc_s,
            Channel::AntiStokes => self.pdc_a,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, eta) in [("eta_s", self.eta_s), ("eta_a", self.eta_a)] {
            if !(eta >= T::zero() && eta <= T::one()) {
                return Err(Error::InvalidParameter { name, reason: format!("must lie in [0, 1], got {eta}") });
            }
        }
        for (name, p) in [("pdc_s", self.pdc_s), ("pdc_a", self.pdc_a)] {
            if !(p >= T::zero() && p < T::one()) {
                return Err(Error::InvalidParameter { name, reason: format!("must lie in [0, 1), got {p}") });
            }
        }
        Ok(())
    }

    /// Click probability for `n` photons: 1 − (1 − p_dc)(1 − η)ⁿ.
    pub fn click_probability(&self, channel: Channel, n: usize) -> T {
        let eta = self.efficiency(channel);
        let pdc = self.dark_count(channel);
        T::one() - (T::one() - pdc) * (T::one() - eta).powi(n as i32)
    }
}

/// D_X as a diagonal operator on the canonical space.
pub fn detection_operator<T: Real>(channel: Channel, model: &DetectorModel<T>, space: &HilbertSpace) -> Result<Op<T>> {
    Op::new(space, real_diagonal(&detection_diagonal(channel, model, space)?))
}

fn detection_diagonal<T: Real>(channel: Channel, model: &DetectorModel<T>, space: &HilbertSpace) -> Result<Vec<T>> {
    model.validate()?;
    let mode = channel.mode();
    if mode >= space.num_modes() {
        return Err(Error::ModeOutOfRange { index: mode, modes: space.num_modes() });
    }
    Ok((0..space.total_dim())
        .map(|i| model.click_probability(channel, space.occupation(i, mode)))
        .collect())
}

/// Single and joint click probabilities of one protocol run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coincidences<T: Real> {
    pub p_s: T,
    pub p_a: T,
    pub p_sa: T,
}

impl<T: Real> Coincidences<T> {
    /// p_SA / (p_S p_A).
    pub fn g2(&self) -> Result<T> {
        if !(self.p_s > T::zero() && self.p_a > T::zero()) {
            return Err(Error::UndefinedNormalization { p_s: self.p_s.as_f64(), p_a: self.p_a.as_f64() });
        }
        Ok(self.p_sa / (self.p_s * self.p_a))
    }

    /// Probability-weighted combination of independent runs.
    pub fn mix(parts: &[(T, Coincidences<T>)]) -> Self {
        let mut out = Self { p_s: T::zero(), p_a: T::zero(), p_sa: T::zero() };
        for (w, c) in parts {
            out.p_s += *w * c.p_s;
            out.p_a += *w * c.p_a;
            out.p_sa += *w * c.p_sa;
        }
        out
    }
}

/// ⟨D_S⟩, ⟨D_A⟩ and ⟨D_S D_A⟩.
pub fn coincidences<T: Real>(rho: &DensityMatrix<T>, d_s: &Op<T>, d_a: &Op<T>) -> Result<Coincidences<T>> {
    if rho.space() != d_s.space() || rho.space() != d_a.space() {
        return Err(Error::SpaceMismatch);
    }
    let joint = d_s.to_sparse().mul(d_a.matrix());
    Ok(Coincidences {
        p_s: trace_of_product(rho.matrix(), d_s.matrix()).re,
        p_a: trace_of_product(rho.matrix(), d_a.matrix()).re,
        p_sa: trace_of_product(rho.matrix(), &joint).re,
    })
}

/// ⟨D_S D_A⟩ / (⟨D_S⟩⟨D_A⟩).
pub fn coincidence_g2<T: Real>(rho: &DensityMatrix<T>, d_s: &Op<T>, d_a: &Op<T>) -> Result<T> {
    coincidences(rho, d_s, d_a)?.g2()
}

/// Phonon state conditioned on a Stokes click.
#[derive(Debug, Clone)]
pub struct HeraldedState<T: Real> {
    pub rho_ph: DensityMatrix<T>,
    pub herald_prob: T,
}

impl<T: Real> HeraldedState<T> {
    /// Free phonon evolution (no drives) over `duration` ps.
    pub fn evolved(&self, params: &SystemParams<T>, duration: T) -> Result<DensityMatrix<T>> {
        let prop = phonon_propagator(self.rho_ph.space(), params, duration)?;
        DensityMatrix::from_matrix_unchecked(self.rho_ph.space(), prop.apply(self.rho_ph.matrix()))
    }
}

/// exp(L t) of the two phonon modes alone.
pub fn phonon_propagator<T: Real>(space: &HilbertSpace, params: &SystemParams<T>, duration: T) -> Result<FreePropagator<T>> {
    let baths: Vec<ModeBath<T>> = params
        .phonons
        .iter()
        .map(|p| ModeBath { freq: p.delta, kappa: p.kappa, n_th: params.n_th })
        .collect();
    FreePropagator::new(space, &baths, duration)
}

/// tr_photons(√D_S ρ √D_S) / tr(D_S ρ). `d_s` must be diagonal.
pub fn herald_conditional_state<T: Real>(rho_after_write: &DensityMatrix<T>, d_s: &Op<T>) -> Result<HeraldedState<T>> {
    if rho_after_write.space() != d_s.space() {
        return Err(Error::SpaceMismatch);
    }
    let d = d_s.matrix();
    let n = d.nrows();
    for j in 0..n {
        for i in 0..n {
            if i != j && d[(i, j)] != Complex::new(T::zero(), T::zero()) {
                return Err(Error::InvalidParameter { name: "d_s", reason: "detection operator must be diagonal".into() });
            }
        }
    }
    let root: Vec<T> = (0..n).map(|i| d[(i, i)].re.max(T::zero()).sqrt()).collect();
    let rho = rho_after_write.matrix();
    let mut post = CMatrix::<T>::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            post[(i, j)] = rho[(i, j)] * (root[i] * root[j]);
        }
    }
    let p = post.trace().re;
    if !(p > T::zero()) {
        return Err(Error::HeraldImpossible(p.as_f64()));
    }
    let post = DensityMatrix::from_matrix_unchecked(rho_after_write.space(), post.unscale(p))?;
    let rho_ph = partial_trace(&post, &[MODE_B1, MODE_B2])?;
    Ok(HeraldedState { rho_ph, herald_prob: p })
}

/// P(0..=n_max) of one mode; levels beyond the truncation read as zero.
pub fn fock_populations<T: Real>(rho: &DensityMatrix<T>, mode: usize, n_max: usize) -> Result<Vec<T>> {
    let marginal = partial_trace(rho, &[mode])?;
    let d = marginal.space().total_dim();
    Ok((0..=n_max)
        .map(|n| if n < d { marginal.matrix()[(n, n)].re } else { T::zero() })
        .collect())
}

/// log₂‖ρ^{T_b₂}‖₁ of a two-mode phonon state; reported unclamped.
pub fn log_negativity<T: Real>(rho_ph: &DensityMatrix<T>) -> Result<T> {
    let pt = partial_transpose(rho_ph, 1)?;
    Ok(trace_norm(pt.matrix())?.log2())
}

/// Weights of |10⟩ and |01⟩ within the one-phonon manifold.
pub fn one_phonon_weights<T: Real>(rho_ph: &DensityMatrix<T>) -> Result<(T, T)> {
    let space = rho_ph.space();
    let w1 = rho_ph.matrix()[(space.index_of(&[1, 0])?, space.index_of(&[1, 0])?)].re;
    let w2 = rho_ph.matrix()[(space.index_of(&[0, 1])?, space.index_of(&[0, 1])?)].re;
    let total = w1 + w2;
    if !(total > T::zero()) {
        return Err(Error::InvalidState("empty one-phonon manifold".into()));
    }
    Ok((w1 / total, w2 / total))
}
