//! Operator algebra on truncated multimode Fock spaces.
//!
//! Basis states are ordered lexicographically with mode 0 as the most
//! significant digit, so an operator acting on mode `k` embeds as
//! `I ⊗ … ⊗ local ⊗ … ⊗ I` in the order the modes were declared.

use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::sync::Arc;

use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{hermiticity_defect, re, CMatrix, Real};

/// Max |A - A†| accepted as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Max |tr ρ - 1| accepted for a density matrix.
pub const TRACE_TOL: f64 = 1e-9;
/// Most negative eigenvalue accepted for a density matrix.
pub const POSITIVITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Mode {
    pub label: String,
    pub dim: usize,
}

/// Ordered set of truncated bosonic modes.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct HilbertSpace {
    modes: Arc<[Mode]>,
    total_dim: usize,
}

impl HilbertSpace {
    pub fn new<S: Into<String>>(modes: impl IntoIterator<Item = (S, usize)>) -> Result<Self> {
        let modes: Vec<Mode> = modes
            .into_iter()
            .map(|(label, dim)| Mode { label: label.into(), dim })
            .collect();
        if modes.is_empty() {
            return Err(Error::WrongModeCount { expected: 1, got: 0 });
        }
        if let Some(bad) = modes.iter().find(|m| m.dim < 2) {
            return Err(Error::InvalidDimension(bad.dim));
        }
        let total_dim = modes.iter().map(|m| m.dim).product();
        Ok(Self { modes: modes.into(), total_dim })
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn num_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.modes.iter().map(|m| m.dim).collect()
    }

    pub fn dim_of(&self, mode: usize) -> Result<usize> {
        self.modes
            .get(mode)
            .map(|m| m.dim)
            .ok_or(Error::ModeOutOfRange { index: mode, modes: self.modes.len() })
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    /// Distance between consecutive values of `mode`'s occupation in the
    /// flattened index.
    pub fn stride(&self, mode: usize) -> usize {
        self.modes[mode + 1..].iter().map(|m| m.dim).product()
    }

    /// Occupation of `mode` in flattened basis state `index`.
    #[inline]
    pub fn occupation(&self, index: usize, mode: usize) -> usize {
        (index / self.stride(mode)) % self.modes[mode].dim
    }

    /// Flattened index of a multi-index of occupations.
    pub fn index_of(&self, occupations: &[usize]) -> Result<usize> {
        if occupations.len() != self.modes.len() {
            return Err(Error::DimensionMismatch { expected: self.modes.len(), got: occupations.len() });
        }
        let mut idx = 0;
        for (m, &n) in self.modes.iter().zip(occupations) {
            if n >= m.dim {
                return Err(Error::DimensionMismatch { expected: m.dim, got: n + 1 });
            }
            idx = idx * m.dim + n;
        }
        Ok(idx)
    }

    /// Space spanned by a subset of the modes, in their original order.
    pub fn subspace(&self, keep: &[usize]) -> Result<Self> {
        let keep = normalize_keep(keep, self.num_modes())?;
        Self::new(keep.iter().map(|&k| (self.modes[k].label.clone(), self.modes[k].dim)))
    }
}

impl fmt::Debug for HilbertSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.modes.iter().map(|m| format!("{}:{}", m.label, m.dim)).collect();
        write!(f, "HilbertSpace[{}]", parts.join(" ⊗ "))
    }
}

fn normalize_keep(keep: &[usize], modes: usize) -> Result<Vec<usize>> {
    if keep.is_empty() {
        return Err(Error::EmptyKeep);
    }
    let mut keep = keep.to_vec();
    keep.sort_unstable();
    keep.dedup();
    if let Some(&bad) = keep.iter().find(|&&k| k >= modes) {
        return Err(Error::ModeOutOfRange { index: bad, modes });
    }
    Ok(keep)
}

/// Bosonic lowering operator truncated to `dim` Fock levels.
pub fn annihilation_op<T: Real>(dim: usize) -> Result<CMatrix<T>> {
    if dim < 2 {
        return Err(Error::InvalidDimension(dim));
    }
    let mut a = CMatrix::<T>::zeros(dim, dim);
    for n in 1..dim {
        a[(n - 1, n)] = re(T::lit(n as f64).sqrt());
    }
    Ok(a)
}

pub fn creation_op<T: Real>(dim: usize) -> Result<CMatrix<T>> {
    Ok(annihilation_op::<T>(dim)?.adjoint())
}

pub fn number_op<T: Real>(dim: usize) -> Result<CMatrix<T>> {
    if dim < 2 {
        return Err(Error::InvalidDimension(dim));
    }
    Ok(CMatrix::from_diagonal(&DVector::from_fn(dim, |n, _| re(T::lit(n as f64)))))
}

/// Dense operator tied to a [`HilbertSpace`].
#[derive(Debug, Clone, PartialEq)]
pub struct Op<T: Real> {
    space: HilbertSpace,
    matrix: CMatrix<T>,
}

impl<T: Real> Op<T> {
    pub fn new(space: &HilbertSpace, matrix: CMatrix<T>) -> Result<Self> {
        let n = space.total_dim();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: matrix.nrows().max(matrix.ncols()) });
        }
        Ok(Self { space: space.clone(), matrix })
    }

    pub fn identity(space: &HilbertSpace) -> Self {
        let n = space.total_dim();
        Self { space: space.clone(), matrix: CMatrix::identity(n, n) }
    }

    pub fn zeros(space: &HilbertSpace) -> Self {
        let n = space.total_dim();
        Self { space: space.clone(), matrix: CMatrix::zeros(n, n) }
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix<T> {
        self.matrix
    }

    pub fn dagger(&self) -> Self {
        Self { space: self.space.clone(), matrix: self.matrix.adjoint() }
    }

    pub fn scale(&self, c: Complex<T>) -> Self {
        Self { space: self.space.clone(), matrix: &self.matrix * c }
    }

    pub fn commutator(&self, other: &Self) -> Self {
        assert_eq!(self.space, other.space, "commutator of operators on different spaces");
        Self { space: self.space.clone(), matrix: &self.matrix * &other.matrix - &other.matrix * &self.matrix }
    }

    pub fn is_hermitian(&self, tol: T) -> bool {
        hermiticity_defect(&self.matrix) <= tol
    }

    pub fn to_sparse(&self) -> SparseOp<T> {
        SparseOp::from_dense(&self.matrix)
    }
}

impl<'a, T: Real> Add<&'a Op<T>> for &'a Op<T> {
    type Output = Op<T>;
    fn add(self, rhs: &'a Op<T>) -> Op<T> {
        assert_eq!(self.space, rhs.space, "sum of operators on different spaces");
        Op { space: self.space.clone(), matrix: &self.matrix + &rhs.matrix }
    }
}

impl<'a, T: Real> Sub<&'a Op<T>> for &'a Op<T> {
    type Output = Op<T>;
    fn sub(self, rhs: &'a Op<T>) -> Op<T> {
        assert_eq!(self.space, rhs.space, "difference of operators on different spaces");
        Op { space: self.space.clone(), matrix: &self.matrix - &rhs.matrix }
    }
}

impl<'a, T: Real> Mul<&'a Op<T>> for &'a Op<T> {
    type Output = Op<T>;
    fn mul(self, rhs: &'a Op<T>) -> Op<T> {
        assert_eq!(self.space, rhs.space, "product of operators on different spaces");
        Op { space: self.space.clone(), matrix: &self.matrix * &rhs.matrix }
    }
}

/// Embeds a single-mode operator into the full space.
pub fn embed<T: Real>(local: &CMatrix<T>, mode_index: usize, space: &HilbertSpace) -> Result<Op<T>> {
    let d = space.dim_of(mode_index)?;
    if local.nrows() != d || local.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, got: local.nrows().max(local.ncols()) });
    }
    let left: usize = space.modes()[..mode_index].iter().map(|m| m.dim).product();
    let right = space.stride(mode_index);
    let matrix = CMatrix::<T>::identity(left, left)
        .kronecker(local)
        .kronecker(&CMatrix::<T>::identity(right, right));
    Ok(Op { space: space.clone(), matrix })
}

/// Lowering operator of `mode` on the full space.
pub fn mode_annihilation<T: Real>(space: &HilbertSpace, mode: usize) -> Result<Op<T>> {
    embed(&annihilation_op(space.dim_of(mode)?)?, mode, space)
}

pub fn mode_number<T: Real>(space: &HilbertSpace, mode: usize) -> Result<Op<T>> {
    embed(&number_op(space.dim_of(mode)?)?, mode, space)
}

/// Compressed-row copy of an operator, used in the hot loops of the
/// master-equation right-hand side.
#[derive(Debug, Clone)]
pub struct SparseOp<T: Real> {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex<T>>,
}

impl<T: Real> SparseOp<T> {
    pub fn from_dense(m: &CMatrix<T>) -> Self {
        let dim = m.nrows();
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for i in 0..dim {
            for j in 0..m.ncols() {
                let v = m[(i, j)];
                if v.re != T::zero() || v.im != T::zero() {
                    cols.push(j);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self { dim, row_ptr, cols, vals }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// `out += alpha * self * x`.
    pub fn mul_acc(&self, alpha: Complex<T>, x: &CMatrix<T>, out: &mut CMatrix<T>) {
        let n = self.dim;
        debug_assert_eq!(x.nrows(), n);
        let ncols = x.ncols();
        let xs = x.as_slice();
        let os = out.as_mut_slice();
        for j in 0..ncols {
            let xc = &xs[j * n..(j + 1) * n];
            let oc = &mut os[j * n..(j + 1) * n];
            for i in 0..n {
                let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
                if lo == hi {
                    continue;
                }
                let mut acc = Complex::new(T::zero(), T::zero());
                for k in lo..hi {
                    acc += self.vals[k] * xc[self.cols[k]];
                }
                oc[i] += alpha * acc;
            }
        }
    }

    pub fn mul(&self, x: &CMatrix<T>) -> CMatrix<T> {
        let mut out = CMatrix::zeros(self.dim, x.ncols());
        self.mul_acc(Complex::new(T::one(), T::zero()), x, &mut out);
        out
    }
}

/// Hermitian, unit-trace, positive semidefinite operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix<T: Real> {
    space: HilbertSpace,
    matrix: CMatrix<T>,
}

impl<T: Real> DensityMatrix<T> {
    /// Validates all density-matrix invariants.
    pub fn new(space: &HilbertSpace, matrix: CMatrix<T>) -> Result<Self> {
        let rho = Self::from_matrix_unchecked(space, matrix)?;
        rho.check()?;
        Ok(rho)
    }

    /// Checks only dimensions; callers take responsibility for the physical
    /// invariants (see [`DensityMatrix::check`]).
    pub fn from_matrix_unchecked(space: &HilbertSpace, matrix: CMatrix<T>) -> Result<Self> {
        let n = space.total_dim();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: matrix.nrows().max(matrix.ncols()) });
        }
        Ok(Self { space: space.clone(), matrix })
    }

    pub fn pure(space: &HilbertSpace, psi: &DVector<Complex<T>>) -> Result<Self> {
        if psi.len() != space.total_dim() {
            return Err(Error::DimensionMismatch { expected: space.total_dim(), got: psi.len() });
        }
        let norm = psi.norm();
        if norm == T::zero() {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        let psi = psi.unscale(norm);
        Self::new(space, &psi * psi.adjoint())
    }

    /// Basis state with the given occupations.
    pub fn fock(space: &HilbertSpace, occupations: &[usize]) -> Result<Self> {
        let idx = space.index_of(occupations)?;
        let n = space.total_dim();
        let mut m = CMatrix::zeros(n, n);
        m[(idx, idx)] = re(T::one());
        Ok(Self { space: space.clone(), matrix: m })
    }

    /// Tensor product of single-mode density matrices, one per mode.
    pub fn product(space: &HilbertSpace, locals: &[CMatrix<T>]) -> Result<Self> {
        if locals.len() != space.num_modes() {
            return Err(Error::WrongModeCount { expected: space.num_modes(), got: locals.len() });
        }
        let mut m = CMatrix::<T>::identity(1, 1);
        for (local, mode) in locals.iter().zip(space.modes()) {
            if local.nrows() != mode.dim || local.ncols() != mode.dim {
                return Err(Error::DimensionMismatch { expected: mode.dim, got: local.nrows() });
            }
            m = m.kronecker(local);
        }
        Self::new(space, m)
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix<T> {
        self.matrix
    }

    pub fn trace(&self) -> Complex<T> {
        self.matrix.trace()
    }

    pub fn eigenvalues(&self) -> DVector<T> {
        hermitian_eigenvalues(&self.matrix)
    }

    pub fn min_eigenvalue(&self) -> T {
        self.eigenvalues().iter().copied().fold(T::max_value().unwrap_or(T::one()), |a, b| a.min(b))
    }

    /// Replaces ρ with (ρ + ρ†)/2.
    pub fn symmetrize(&mut self) {
        symmetrize_in_place(&mut self.matrix);
    }

    pub fn check(&self) -> Result<()> {
        let defect = hermiticity_defect(&self.matrix);
        if defect > T::tolerance(HERMITIAN_TOL) {
            return Err(Error::InvalidState(format!("not Hermitian (max |ρ - ρ†| = {:e})", defect.as_f64())));
        }
        let tr = self.trace();
        let drift = (tr - re(T::one())).modulus();
        if drift > T::tolerance(TRACE_TOL) {
            return Err(Error::InvalidState(format!("trace {} deviates from 1", tr.re.as_f64())));
        }
        let lo = self.min_eigenvalue();
        if lo < -T::tolerance(POSITIVITY_TOL) {
            return Err(Error::InvalidState(format!("negative eigenvalue {:e}", lo.as_f64())));
        }
        Ok(())
    }
}

pub(crate) fn symmetrize_in_place<T: Real>(m: &mut CMatrix<T>) {
    let n = m.nrows();
    let half = T::lit(0.5);
    for j in 0..n {
        m[(j, j)] = Complex::new(m[(j, j)].re, T::zero());
        for i in 0..j {
            let avg = (m[(i, j)] + m[(j, i)].conj()) * half;
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
    }
}

/// Single-mode Boltzmann state with mean occupation `nbar` (before
/// truncation), renormalized onto `dim` levels.
pub fn thermal_state<T: Real>(dim: usize, nbar: T) -> Result<CMatrix<T>> {
    if dim < 2 {
        return Err(Error::InvalidDimension(dim));
    }
    if nbar < T::zero() {
        return Err(Error::InvalidParameter { name: "n_th", reason: "must be non-negative".into() });
    }
    let q = nbar / (T::one() + nbar);
    let weights: Vec<T> = (0..dim).map(|n| q.powi(n as i32)).collect();
    let z = weights.iter().fold(T::zero(), |a, &b| a + b);
    Ok(CMatrix::from_diagonal(&DVector::from_iterator(dim, weights.into_iter().map(|w| re(w / z)))))
}

/// Vacuum projector on one mode.
pub fn vacuum_state<T: Real>(dim: usize) -> Result<CMatrix<T>> {
    if dim < 2 {
        return Err(Error::InvalidDimension(dim));
    }
    let mut m = CMatrix::zeros(dim, dim);
    m[(0, 0)] = re(T::one());
    Ok(m)
}

/// tr(ρ · op).
pub fn expectation<T: Real>(rho: &DensityMatrix<T>, op: &Op<T>) -> Result<Complex<T>> {
    if rho.space != op.space {
        return Err(Error::SpaceMismatch);
    }
    Ok(trace_of_product(&rho.matrix, &op.matrix))
}

pub(crate) fn trace_of_product<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> Complex<T> {
    let n = a.nrows();
    let mut acc = Complex::new(T::zero(), T::zero());
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// Reduced state on `keep` (mode order preserved).
pub fn partial_trace<T: Real>(rho: &DensityMatrix<T>, keep: &[usize]) -> Result<DensityMatrix<T>> {
    let space = &rho.space;
    let keep = normalize_keep(keep, space.num_modes())?;
    let reduced = space.subspace(&keep)?;
    let n = space.total_dim();

    // kept / traced multi-index of every basis state
    let mut kept_idx = vec![0usize; n];
    let mut rest_idx = vec![0usize; n];
    for i in 0..n {
        let (mut k, mut r) = (0, 0);
        for (mode, m) in space.modes().iter().enumerate() {
            let occ = space.occupation(i, mode);
            if keep.contains(&mode) {
                k = k * m.dim + occ;
            } else {
                r = r * m.dim + occ;
            }
        }
        kept_idx[i] = k;
        rest_idx[i] = r;
    }
    let rest_dim = n / reduced.total_dim();
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); rest_dim];
    for i in 0..n {
        groups[rest_idx[i]].push(i);
    }
    let m = reduced.total_dim();
    let mut out = CMatrix::<T>::zeros(m, m);
    for group in &groups {
        for &a in group {
            for &b in group {
                out[(kept_idx[a], kept_idx[b])] += rho.matrix[(a, b)];
            }
        }
    }
    DensityMatrix::from_matrix_unchecked(&reduced, out)
}

/// Transposes the indices of `mode` in a two-mode operator.
pub fn partial_transpose<T: Real>(rho: &DensityMatrix<T>, mode: usize) -> Result<Op<T>> {
    let space = &rho.space;
    if space.num_modes() != 2 {
        return Err(Error::WrongModeCount { expected: 2, got: space.num_modes() });
    }
    Ok(Op { space: space.clone(), matrix: partial_transpose_matrix(&rho.matrix, space, mode)? })
}

pub(crate) fn partial_transpose_matrix<T: Real>(
    m: &CMatrix<T>,
    space: &HilbertSpace,
    mode: usize,
) -> Result<CMatrix<T>> {
    let d = space.dim_of(mode)?;
    let stride = space.stride(mode);
    let n = space.total_dim();
    let mut out = CMatrix::<T>::zeros(n, n);
    for j in 0..n {
        let mj = (j / stride) % d;
        for i in 0..n {
            let mi = (i / stride) % d;
            // swap the `mode` digit between row and column
            let i2 = i - mi * stride + mj * stride;
            let j2 = j - mj * stride + mi * stride;
            out[(i2, j2)] = m[(i, j)];
        }
    }
    Ok(out)
}

/// Eigenvalues of a Hermitian matrix (no Hermiticity check).
pub fn hermitian_eigenvalues<T: Real>(m: &CMatrix<T>) -> DVector<T> {
    m.clone().symmetric_eigenvalues()
}

/// tr √(X†X) of a Hermitian matrix, i.e. the sum of |eigenvalues|.
pub fn trace_norm<T: Real>(h: &CMatrix<T>) -> Result<T> {
    if h.nrows() != h.ncols() {
        return Err(Error::DimensionMismatch { expected: h.nrows(), got: h.ncols() });
    }
    let defect = hermiticity_defect(h);
    if defect > T::tolerance(HERMITIAN_TOL) {
        return Err(Error::NotHermitian { defect: defect.as_f64() });
    }
    Ok(hermitian_eigenvalues(h).iter().fold(T::zero(), |a, &x| a + x.abs()))
}

/// Builds a dense matrix from a real diagonal.
pub fn real_diagonal<T: Real>(d: &[T]) -> CMatrix<T> {
    CMatrix::from_diagonal(&DVector::from_iterator(d.len(), d.iter().map(|&x| re(x))))
}

#[allow(dead_code)]
pub(crate) fn real_matrix<T: Real>(m: &DMatrix<T>) -> CMatrix<T> {
    m.map(re)
}
