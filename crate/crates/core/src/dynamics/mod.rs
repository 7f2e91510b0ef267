//! Lindblad master equation and the two-pulse write/read protocol.

pub mod free;
pub mod integrator;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::hilbert::{symmetrize_in_place, thermal_state, vacuum_state, DensityMatrix, HilbertSpace, Op, SparseOp};
use crate::model::{collapse_operators, Drive, HamiltonianTerms, SystemParams, MODE_B1, MODE_B2};
use crate::scalar::{im, CMatrix, Real};

pub use free::{FreePropagator, ModeBath};
pub use integrator::{IntegratorConfig, Method, StepStats};

/// Max |tr ρ − 1| tolerated at the end of a propagation.
pub const TRACE_DRIFT_TOL: f64 = 1e-8;
/// Most negative eigenvalue tolerated at the end of a propagation.
pub const EVOLVED_POSITIVITY_TOL: f64 = 1e-8;

/// Sparse right-hand side of dρ/dt = −i[H(t), ρ] + Σ_k D[C_k]ρ.
///
/// Uses H_eff = H − (i/2)Σ C†C, so that for Hermitian ρ
/// dρ/dt = K + K† + Σ C ρ C† with K = −i·H_eff·ρ.
#[derive(Debug, Clone)]
pub struct Liouvillian<T: Real> {
    dim: usize,
    heff: Vec<(Drive<T>, SparseOp<T>)>,
    jumps: Vec<SparseOp<T>>,
}

impl<T: Real> Liouvillian<T> {
    pub fn new(space: &HilbertSpace, terms: &[(Drive<T>, Op<T>)], collapse: &[Op<T>]) -> Result<Self> {
        for op in terms.iter().map(|(_, op)| op).chain(collapse) {
            if op.space() != space {
                return Err(Error::SpaceMismatch);
            }
        }
        let n = space.total_dim();
        let mut damping = CMatrix::<T>::zeros(n, n);
        for c in collapse {
            damping += c.matrix().adjoint() * c.matrix();
        }
        let half_i = im(T::lit(0.5));

        let mut heff = Vec::with_capacity(terms.len() + 1);
        let mut merged = false;
        for (drive, op) in terms {
            if !merged && *drive == Drive::Constant {
                heff.push((Drive::Constant, SparseOp::from_dense(&(op.matrix() - &damping * half_i))));
                merged = true;
            } else {
                heff.push((*drive, op.to_sparse()));
            }
        }
        if !merged {
            heff.push((Drive::Constant, SparseOp::from_dense(&(-(&damping * half_i)))));
        }
        let jumps = collapse.iter().map(Op::to_sparse).collect();
        Ok(Self { dim: n, heff, jumps })
    }

    pub fn from_params(params: &SystemParams<T>, space: &HilbertSpace) -> Result<Self> {
        let h = HamiltonianTerms::new(params, space)?;
        Self::new(space, &h.terms, &collapse_operators(params, space)?)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Writes dρ/dt at time `t` into `out`. `rho` must be Hermitian.
    pub fn apply(&self, t: T, rho: &CMatrix<T>, out: &mut CMatrix<T>) {
        let n = self.dim;
        let mut k = CMatrix::<T>::zeros(n, n);
        let minus_i = im(-T::one());
        for (drive, op) in &self.heff {
            let f = drive.at(t);
            if f != T::zero() {
                op.mul_acc(minus_i * f, rho, &mut k);
            }
        }
        out.copy_from(&k);
        *out += k.adjoint();
        let one = Complex::new(T::one(), T::zero());
        for c in &self.jumps {
            let j = c.mul(rho);
            c.mul_acc(one, &j.adjoint(), out);
        }
    }
}

/// −i[H, ρ] + Σ_k (C_k ρ C_k† − ½{C_k†C_k, ρ}).
pub fn lindblad_derivative<T: Real>(rho: &DensityMatrix<T>, h: &Op<T>, collapse: &[Op<T>]) -> Result<CMatrix<T>> {
    let l = Liouvillian::new(rho.space(), &[(Drive::Constant, h.clone())], collapse)?;
    let n = rho.space().total_dim();
    let mut out = CMatrix::zeros(n, n);
    l.apply(T::zero(), rho.matrix(), &mut out);
    Ok(out)
}

fn integrate_with<T: Real>(
    liouvillian: &Liouvillian<T>,
    rho: &mut CMatrix<T>,
    t0: T,
    t1: T,
    config: &IntegratorConfig<T>,
) -> Result<StepStats> {
    let stats = integrator::integrate(|t, y, dy| liouvillian.apply(t, y, dy), rho, t0, t1, config)?;
    symmetrize_in_place(rho);
    Ok(stats)
}

fn check_evolved<T: Real>(rho: &DensityMatrix<T>, t: T) -> Result<()> {
    let drift = (rho.trace().re - T::one()).abs().max(rho.trace().im.abs());
    if drift > T::tolerance(TRACE_DRIFT_TOL) {
        return Err(Error::Integration { t: t.as_f64(), reason: format!("trace drift {:e}", drift.as_f64()) });
    }
    let lo = rho.min_eigenvalue();
    if lo < -T::tolerance(EVOLVED_POSITIVITY_TOL) {
        return Err(Error::Integration { t: t.as_f64(), reason: format!("negative eigenvalue {:e}", lo.as_f64()) });
    }
    Ok(())
}

/// Integrates the full master equation from `t_start` to `t_end`.
pub fn evolve<T: Real>(
    rho0: &DensityMatrix<T>,
    t_start: T,
    t_end: T,
    params: &SystemParams<T>,
    config: &IntegratorConfig<T>,
) -> Result<DensityMatrix<T>> {
    if !(t_end > t_start) {
        return Err(Error::InvalidParameter { name: "t_end", reason: "must exceed t_start".into() });
    }
    params.validate()?;
    let space = rho0.space();
    let l = Liouvillian::from_params(params, space)?;
    let mut m = rho0.matrix().clone();
    integrate_with(&l, &mut m, t_start, t_end, config)?;
    let rho = DensityMatrix::from_matrix_unchecked(space, m)?;
    check_evolved(&rho, t_end)?;
    Ok(rho)
}

/// Thermal phonons at `n_th` on both phonon modes, photons in vacuum.
pub fn initial_state<T: Real>(params: &SystemParams<T>, space: &HilbertSpace) -> Result<DensityMatrix<T>> {
    let dims = space.dims();
    if dims.len() != 4 {
        return Err(Error::WrongModeCount { expected: 4, got: dims.len() });
    }
    DensityMatrix::product(
        space,
        &[
            thermal_state(dims[MODE_B1], params.n_th)?,
            thermal_state(dims[MODE_B2], params.n_th)?,
            vacuum_state(dims[2])?,
            vacuum_state(dims[3])?,
        ],
    )
}

/// Drive-free baths of the canonical modes.
pub fn free_baths<T: Real>(params: &SystemParams<T>) -> [ModeBath<T>; 4] {
    let [p1, p2] = params.phonons;
    [
        ModeBath { freq: p1.delta, kappa: p1.kappa, n_th: params.n_th },
        ModeBath { freq: p2.delta, kappa: p2.kappa, n_th: params.n_th },
        ModeBath::rotation(params.delta_s),
        ModeBath::rotation(params.delta_a),
    ]
}

/// States recorded by [`run_two_pulse`].
#[derive(Debug, Clone)]
pub struct ProtocolResult<T: Real> {
    /// After the read window closes.
    pub rho_final: DensityMatrix<T>,
    /// At t0w + 6σ_w.
    pub rho_after_write: DensityMatrix<T>,
    /// Optional samples (t, ρ(t)).
    pub timeline: Vec<(T, DensityMatrix<T>)>,
    pub stats: StepStats,
}

/// Write pulse centered at t = 0, read pulse at `delta_t`.
struct Schedule<T: Real> {
    start: T,
    write_end: T,
    read_start: T,
    end: T,
}

impl<T: Real> Schedule<T> {
    fn gap(&self) -> Option<(T, T)> {
        (self.read_start > self.write_end).then_some((self.write_end, self.read_start))
    }
}

struct Protocol<'a, T: Real> {
    params: SystemParams<T>,
    space: &'a HilbertSpace,
    config: &'a IntegratorConfig<T>,
    liouvillian: Liouvillian<T>,
    schedule: Schedule<T>,
    stats: StepStats,
}

impl<'a, T: Real> Protocol<'a, T> {
    fn new(delta_t: T, params: &SystemParams<T>, space: &'a HilbertSpace, config: &'a IntegratorConfig<T>) -> Result<Self> {
        params.validate()?;
        config.validate()?;
        let mut params = params.clone();
        params.write.t0 = T::zero();
        params.read.t0 = delta_t;
        let (start, write_end) = params.write.window();
        let (read_start, read_end) = params.read.window();
        if read_start < start {
            return Err(Error::InvalidParameter {
                name: "delta_t",
                reason: format!("read window starts at {read_start} ps, before the simulation start {start} ps"),
            });
        }
        let liouvillian = Liouvillian::from_params(&params, space)?;
        let end = read_end.max(write_end);
        Ok(Self {
            params,
            space,
            config,
            liouvillian,
            schedule: Schedule { start, write_end, read_start, end },
            stats: StepStats::default(),
        })
    }

    /// Propagates from `from` to `to`, using the closed form inside the gap.
    fn advance(&mut self, rho: &mut CMatrix<T>, from: T, to: T) -> Result<()> {
        if !(to > from) {
            return Ok(());
        }
        let mut t = from;
        if let (Some((g0, g1)), true) = (self.schedule.gap(), self.config.free_fast_path) {
            let cuts = [g0, g1];
            for &cut in cuts.iter().filter(|&&c| c > from && c < to) {
                self.segment(rho, t, cut)?;
                t = cut;
            }
        }
        self.segment(rho, t, to)
    }

    fn segment(&mut self, rho: &mut CMatrix<T>, from: T, to: T) -> Result<()> {
        if !(to > from) {
            return Ok(());
        }
        let in_gap = self.config.free_fast_path
            && self.schedule.gap().is_some_and(|(g0, g1)| from >= g0 && to <= g1);
        if in_gap {
            let prop = FreePropagator::new(self.space, &free_baths(&self.params), to - from)?;
            *rho = prop.apply(rho);
            symmetrize_in_place(rho);
        } else {
            let s = integrate_with(&self.liouvillian, rho, from, to, self.config)?;
            self.stats.accepted += s.accepted;
            self.stats.rejected += s.rejected;
            self.stats.rhs_evals += s.rhs_evals;
        }
        Ok(())
    }
}

/// Runs the write/read protocol from −6σ_w to Δt + 6σ_r, starting from
/// [`initial_state`].
pub fn run_two_pulse<T: Real>(
    delta_t: T,
    params: &SystemParams<T>,
    space: &HilbertSpace,
    config: &IntegratorConfig<T>,
) -> Result<ProtocolResult<T>> {
    run_two_pulse_sampled(delta_t, params, space, config, None)
}

/// Like [`run_two_pulse`], also recording ρ every `sample_every` ps.
pub fn run_two_pulse_sampled<T: Real>(
    delta_t: T,
    params: &SystemParams<T>,
    space: &HilbertSpace,
    config: &IntegratorConfig<T>,
    sample_every: Option<T>,
) -> Result<ProtocolResult<T>> {
    let mut proto = Protocol::new(delta_t, params, space, config)?;
    let Schedule { start, write_end, end, .. } = proto.schedule;

    let mut marks = vec![write_end, end];
    if let Some(dt) = sample_every {
        if !(dt > T::zero()) {
            return Err(Error::InvalidParameter { name: "sample_every", reason: "must be > 0".into() });
        }
        let mut t = start;
        while t < end {
            marks.push(t);
            t += dt;
        }
    }
    marks.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
    marks.dedup();

    let mut rho = initial_state(&proto.params, space)?.into_matrix();
    let mut t = start;
    let mut after_write = None;
    let mut timeline = Vec::new();
    for mark in marks {
        proto.advance(&mut rho, t, mark)?;
        t = mark;
        if mark == write_end {
            after_write = Some(DensityMatrix::from_matrix_unchecked(space, rho.clone())?);
        }
        if sample_every.is_some() && mark < end {
            timeline.push((mark, DensityMatrix::from_matrix_unchecked(space, rho.clone())?));
        }
    }
    let rho_final = DensityMatrix::from_matrix_unchecked(space, rho)?;
    if sample_every.is_some() {
        timeline.push((end, rho_final.clone()));
    }
    let rho_after_write = after_write.expect("write window end is always a mark");
    check_evolved(&rho_after_write, write_end)?;
    check_evolved(&rho_final, end)?;
    Ok(ProtocolResult { rho_final, rho_after_write, timeline, stats: proto.stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{expectation, mode_annihilation, mode_number};
    use crate::model::{canonical_space, MODE_A, MODE_S};
    use crate::scalar::max_abs_diff;
    use nalgebra::DVector;

    fn single_mode() -> HilbertSpace {
        HilbertSpace::new([("b", 3)]).unwrap()
    }

    #[test]
    fn derivative_vanishes_without_generators() {
        let s = single_mode();
        let rho = DensityMatrix::new(&s, thermal_state(3, 0.3).unwrap()).unwrap();
        let d = lindblad_derivative(&rho, &Op::zeros(&s), &[]).unwrap();
        assert!(d.iter().all(|z| *z == Complex::new(0.0, 0.0)));
    }

    #[test]
    fn derivative_decay_rates() {
        let s = single_mode();
        let kappa: f64 = 0.7;
        let n = mode_number::<f64>(&s, 0).unwrap();
        let b = mode_annihilation::<f64>(&s, 0).unwrap();

        let one = DensityMatrix::fock(&s, &[1]).unwrap();
        let d = lindblad_derivative(&one, &Op::zeros(&s), &[b.scale(Complex::new(kappa.sqrt(), 0.0))]).unwrap();
        let dn = crate::hilbert::trace_of_product(&d, n.matrix());
        assert!((dn.re + kappa).abs() < 1e-14);
        assert!(d.trace().norm() < 1e-12);

        // thermal pair at n=0: dn/dt = κ n_th
        let nth: f64 = 0.04;
        let ops = [b.scale(Complex::new((kappa * (1.0 + nth)).sqrt(), 0.0)), b.dagger().scale(Complex::new((kappa * nth).sqrt(), 0.0))];
        let vac = DensityMatrix::fock(&s, &[0]).unwrap();
        let d = lindblad_derivative(&vac, &Op::zeros(&s), &ops).unwrap();
        let dn = crate::hilbert::trace_of_product(&d, n.matrix());
        assert!((dn.re - kappa * nth).abs() < 1e-14);
    }

    fn quiet_params() -> SystemParams<f64> {
        let mut p = SystemParams::paper_defaults();
        p.lambda_ws = 0.0;
        p.lambda_ra = 0.0;
        p.lambda_fwm = 0.0;
        p
    }

    #[test]
    fn free_evolution_conserves_populations_without_damping() {
        let mut p = quiet_params();
        p.n_th = 0.0;
        p.phonons[0].kappa = 1e-300;
        p.phonons[1].kappa = 1e-300;
        let s = canonical_space([2, 2, 2, 2]).unwrap();
        let mut psi = DVector::zeros(16);
        psi[s.index_of(&[1, 0, 0, 0]).unwrap()] = Complex::new(0.6, 0.0);
        psi[s.index_of(&[0, 1, 0, 0]).unwrap()] = Complex::new(0.8, 0.0);
        let rho0 = DensityMatrix::pure(&s, &psi).unwrap();
        let rho = evolve(&rho0, 0.0, 1.0, &p, &IntegratorConfig::default()).unwrap();
        let d0 = rho0.matrix().diagonal();
        let d1 = rho.matrix().diagonal();
        assert!((d0 - d1).iter().all(|z| z.norm() < 1e-12));
        let (i, j) = (s.index_of(&[1, 0, 0, 0]).unwrap(), s.index_of(&[0, 1, 0, 0]).unwrap());
        let expected = Complex::new(0.48, 0.0) * Complex::from_polar(1.0, -(p.phonons[0].delta - p.phonons[1].delta));
        assert!((rho.matrix()[(i, j)] - expected).norm() < 1e-8);
    }

    #[test]
    fn single_mode_decay_to_one_over_e() {
        let mut p = quiet_params();
        p.n_th = 0.0;
        p.phonons[0].kappa = 1.0 / 1.7;
        let s = canonical_space([3, 2, 2, 2]).unwrap();
        let rho0 = DensityMatrix::fock(&s, &[1, 0, 0, 0]).unwrap();
        let rho = evolve(&rho0, 0.0, 1.7, &p, &IntegratorConfig::default()).unwrap();
        let n = expectation(&rho, &mode_number(&s, MODE_B1).unwrap()).unwrap();
        assert!((n.re - (-1.0f64).exp()).abs() < 1e-4);
    }

    #[test]
    fn beat_period_of_two_mode_superposition() {
        let mut p = quiet_params();
        p.n_th = 0.0;
        p.phonons[0].kappa = 1e-300;
        p.phonons[1].kappa = 1e-300;
        let s = canonical_space([2, 2, 2, 2]).unwrap();
        let (b1, b2) = (p.phonons[0].beta, p.phonons[1].beta);
        let mut psi = DVector::zeros(16);
        psi[s.index_of(&[1, 0, 0, 0]).unwrap()] = Complex::new(b1, 0.0);
        psi[s.index_of(&[0, 1, 0, 0]).unwrap()] = Complex::from_polar(b2, std::f64::consts::PI / 6.0);
        let rho0 = DensityMatrix::pure(&s, &psi).unwrap();
        let (i, j) = (s.index_of(&[1, 0, 0, 0]).unwrap(), s.index_of(&[0, 1, 0, 0]).unwrap());
        let c0 = rho0.matrix()[(i, j)];
        // accumulate the unwrapped phase of ρ_ij(t)/ρ_ij(0) until it reaches −2π
        let config = IntegratorConfig::default();
        let mut rho = rho0.clone();
        let dt = 0.01;
        let mut prev_arg = 0.0f64;
        let mut total = 0.0f64;
        let mut period = None;
        for k in 1..600 {
            rho = evolve(&rho, (k - 1) as f64 * dt, k as f64 * dt, &p, &config).unwrap();
            let arg = (rho.matrix()[(i, j)] / c0).arg();
            let mut step = arg - prev_arg;
            if step > std::f64::consts::PI {
                step -= 2.0 * std::f64::consts::PI;
            } else if step < -std::f64::consts::PI {
                step += 2.0 * std::f64::consts::PI;
            }
            let before = total;
            total += step;
            prev_arg = arg;
            if total <= -2.0 * std::f64::consts::PI {
                let frac = (-2.0 * std::f64::consts::PI - before) / (total - before);
                period = Some(((k - 1) as f64 + frac) * dt);
                break;
            }
        }
        let period = period.expect("coherence completes a cycle");
        assert!((period - 3.876).abs() < 1e-3, "period {period}");
    }

    #[test]
    fn fast_path_matches_brute_force() {
        let p = quiet_params();
        let s = canonical_space([3, 3, 2, 2]).unwrap();
        let mut p2 = p.clone();
        p2.delta_s = 0.3;
        p2.delta_a = -0.2;
        // a state with coherences on every mode
        let mut psi = DVector::zeros(s.total_dim());
        for (k, z) in psi.iter_mut().enumerate() {
            *z = Complex::new(1.0 / (1.0 + k as f64), 0.1 * k as f64 / 36.0);
        }
        let rho0 = DensityMatrix::pure(&s, &psi).unwrap();
        let config = IntegratorConfig { rel_tol: 1e-12, abs_tol: 1e-14, ..IntegratorConfig::default() };
        let brute = evolve(&rho0, 0.0, 2.5, &p2, &config).unwrap();
        let prop = FreePropagator::new(&s, &free_baths(&p2), 2.5).unwrap();
        let fast = prop.apply(rho0.matrix());
        assert!(max_abs_diff(brute.matrix(), &fast) < 1e-9);
    }

    #[test]
    fn relaxation_to_thermal_occupancy() {
        let mut p = quiet_params();
        p.phonons[0].delta = 0.0;
        let s = canonical_space([5, 2, 2, 2]).unwrap();
        let rho0 = DensityMatrix::fock(&s, &[2, 0, 0, 0]).unwrap();
        let tau = p.phonons[0].tau();
        let prop = FreePropagator::new(&s, &free_baths(&p), 20.0 * tau).unwrap();
        let rho = DensityMatrix::from_matrix_unchecked(&s, prop.apply(rho0.matrix())).unwrap();
        let n = expectation(&rho, &mode_number(&s, MODE_B1).unwrap()).unwrap().re;
        assert!((n - 0.04).abs() < 1e-4, "n = {n}");
    }

    #[test]
    fn no_read_coupling_leaves_anti_stokes_empty() {
        let mut p = SystemParams::<f64>::paper_defaults();
        p.lambda_ra = 0.0;
        let s = canonical_space([3, 3, 3, 3]).unwrap();
        let out = run_two_pulse(1.5f64, &p, &s, &IntegratorConfig::default()).unwrap();
        let na = expectation(&out.rho_final, &mode_number(&s, MODE_A).unwrap()).unwrap();
        assert!(na.re.abs() < 1e-12_f64);
    }

    #[test]
    fn no_coupling_keeps_initial_state() {
        let p = quiet_params();
        let s = canonical_space([3, 3, 2, 2]).unwrap();
        let out = run_two_pulse(3.0, &p, &s, &IntegratorConfig::default()).unwrap();
        let init = initial_state(&p, &s).unwrap();
        assert!(max_abs_diff(out.rho_final.matrix(), init.matrix()) < 1e-9);
    }

    #[test]
    fn stokes_population_matches_perturbative_estimate() {
        // oracle: r² (1 + n_th) with r = Λ √(2π) σ
        let p = SystemParams::<f64>::paper_defaults();
        let r = p.write_squeezing();
        let oracle = r * r * (1.0 + p.n_th);
        let s = canonical_space([3, 3, 3, 3]).unwrap();
        let out = run_two_pulse(1.0, &p, &s, &IntegratorConfig::default()).unwrap();
        let ns = expectation(&out.rho_final, &mode_number(&s, MODE_S).unwrap()).unwrap().re;
        assert!((ns / 4.9e-4 - 1.0).abs() < 0.2, "<n_S> = {ns}");
        // phonon damping during the pulse shaves off a few percent
        assert!((ns / oracle - 1.0).abs() < 0.04, "<n_S> = {ns} vs {oracle}");
    }

    #[test]
    fn read_window_before_start_is_rejected() {
        let p = SystemParams::<f64>::paper_defaults();
        let s = canonical_space([2, 2, 2, 2]).unwrap();
        assert!(run_two_pulse(-1.0, &p, &s, &IntegratorConfig::default()).is_err());
    }

    #[test]
    fn timeline_samples_are_valid_states() {
        let p = SystemParams::<f64>::paper_defaults();
        let s = canonical_space([3, 3, 2, 2]).unwrap();
        let out = run_two_pulse_sampled(2.0, &p, &s, &IntegratorConfig::default(), Some(0.25)).unwrap();
        assert!(out.timeline.len() > 8);
        for (t, rho) in &out.timeline {
            assert!((rho.trace().re - 1.0).abs() < 1e-8, "t = {t}");
            assert!(rho.min_eigenvalue() > -1e-8, "t = {t}");
        }
        let w = out.timeline.windows(2).all(|w| w[0].0 < w[1].0);
        assert!(w);
    }
}
