//! Dense complex linear algebra for pure states, density matrices, unitaries
//! and projectors.
//!
//! Fidelity convention: for pure states `F(ψ, φ) = |⟨ψ|φ⟩|²` (squared
//! overlap) and for mixed states the squared Uhlmann fidelity
//! `F(ρ, σ) = (tr √(√ρ σ √ρ))²`. The two agree on rank-1 inputs. The
//! unsquared ("root") fidelity is exposed separately as
//! [`root_fidelity_mixed`] because joint concavity holds for it and not for
//! the squared form.

mod register;

pub use register::{Register, SubsystemLayout};

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Tolerance applied when constructing states, unitaries and density matrices.
pub const CONSTRUCTION_TOL: f64 = 1e-10;
/// Tolerance for derived quantities (fidelities, distances, traces).
pub const DERIVED_TOL: f64 = 1e-8;
/// Residual-norm cutoff that decides the numerical rank of a span.
pub const RANK_TOL: f64 = 1e-9;
/// Default cap on the total simulated dimension.
pub const DEFAULT_MAX_DIM: usize = 1 << 14;

/// Cap on the total simulated dimension, read once from `QPUF_MAX_DIM`.
pub fn max_dim() -> usize {
    static CAP: OnceLock<usize> = OnceLock::new();
    *CAP.get_or_init(|| {
        std::env::var("QPUF_MAX_DIM")
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&v| v > 0)
            .unwrap_or(DEFAULT_MAX_DIM)
    })
}

pub(crate) fn check_dim_cap(requested: usize) -> Result<()> {
    let cap = max_dim();
    if requested > cap {
        return Err(Error::DimensionCap { requested, cap });
    }
    Ok(())
}

fn check_same_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// Normalized pure state.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amps: DVector<C64>,
}

impl StateVector {
    /// Wraps `amps`, which must already have unit norm.
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        Self::from_vector(DVector::from_vec(amps))
    }

    pub fn from_vector(amps: DVector<C64>) -> Result<Self> {
        if amps.is_empty() {
            return Err(Error::InvalidParameter("state dimension must be positive".into()));
        }
        let norm = amps.norm();
        if (norm - 1.0).abs() > CONSTRUCTION_TOL {
            return Err(Error::NotNormalized(norm));
        }
        Ok(Self { amps })
    }

    /// Normalizes `amps`; fails on the zero vector.
    pub fn normalized(amps: Vec<C64>) -> Result<Self> {
        Self::normalize_vector(DVector::from_vec(amps))
    }

    pub fn normalize_vector(amps: DVector<C64>) -> Result<Self> {
        if amps.is_empty() {
            return Err(Error::InvalidParameter("state dimension must be positive".into()));
        }
        let norm = amps.norm();
        if norm.is_nan() || norm <= 1e-300 {
            return Err(Error::ZeroVector);
        }
        Ok(Self {
            amps: amps.unscale(norm),
        })
    }

    /// Computational basis state `|index⟩` of dimension `dim`.
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::InvalidParameter(format!(
                "basis index {index} out of range for dimension {dim}"
            )));
        }
        let mut amps = DVector::zeros(dim);
        amps[index] = C64::new(1.0, 0.0);
        Ok(Self { amps })
    }

    /// Uniform superposition over all basis states.
    pub fn uniform(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("state dimension must be positive".into()));
        }
        let a = C64::new(1.0 / (dim as f64).sqrt(), 0.0);
        Ok(Self {
            amps: DVector::from_element(dim, a),
        })
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        self.amps.as_slice()
    }

    pub fn as_vector(&self) -> &DVector<C64> {
        &self.amps
    }

    pub fn into_vector(self) -> DVector<C64> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.norm()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        check_same_dim(self.dim(), other.dim())?;
        Ok(self.amps.dotc(&other.amps))
    }

    /// `|self⟩⟨self|`.
    pub fn density(&self) -> DensityMatrix {
        DensityMatrix {
            m: &self.amps * self.amps.adjoint(),
        }
    }

    pub(crate) fn from_vector_unchecked(amps: DVector<C64>) -> Self {
        Self { amps }
    }
}

/// Unitary matrix, `U†U = I` to [`CONSTRUCTION_TOL`].
#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryMatrix {
    m: DMatrix<C64>,
}

impl UnitaryMatrix {
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::NotSquare(m.nrows(), m.ncols()));
        }
        if m.nrows() == 0 {
            return Err(Error::InvalidParameter("matrix dimension must be positive".into()));
        }
        let dev = unitarity_deviation(&m);
        if dev > CONSTRUCTION_TOL {
            return Err(Error::NotUnitary(dev));
        }
        Ok(Self { m })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            m: DMatrix::identity(dim, dim),
        }
    }

    /// Diagonal unitary from phases `e^{iθ_k}`.
    pub fn diagonal_phases(phases: &[f64]) -> Self {
        let diag = DVector::from_iterator(phases.len(), phases.iter().map(|&t| C64::from_polar(1.0, t)));
        Self {
            m: DMatrix::from_diagonal(&diag),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn adjoint(&self) -> Self {
        Self { m: self.m.adjoint() }
    }

    /// `self · other`.
    pub fn compose(&self, other: &UnitaryMatrix) -> Result<Self> {
        check_same_dim(self.dim(), other.dim())?;
        Ok(Self { m: &self.m * &other.m })
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &UnitaryMatrix) -> Result<Self> {
        check_dim_cap(self.dim() * other.dim())?;
        Ok(Self {
            m: self.m.kronecker(&other.m),
        })
    }

    pub(crate) fn from_matrix_unchecked(m: DMatrix<C64>) -> Self {
        Self { m }
    }
}

/// `max |(U†U − I)_ij|`.
pub fn unitarity_deviation(m: &DMatrix<C64>) -> f64 {
    let n = m.nrows();
    let prod = m.adjoint() * m;
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((prod[(i, j)] - C64::new(target, 0.0)).norm());
        }
    }
    worst
}

fn hermiticity_deviation(m: &DMatrix<C64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

fn hermitian_part(m: &DMatrix<C64>) -> DMatrix<C64> {
    (m + m.adjoint()).scale(0.5)
}

/// Eigen-decomposition of a Hermitian matrix (symmetrized first).
fn hermitian_eigen(m: &DMatrix<C64>) -> SymmetricEigen<C64, nalgebra::Dyn> {
    SymmetricEigen::new(hermitian_part(m))
}

/// Real eigenvalues of a Hermitian matrix.
pub fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Vec<f64> {
    hermitian_eigen(m).eigenvalues.iter().copied().collect()
}

/// Density matrix: Hermitian, unit trace, positive semi-definite.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    m: DMatrix<C64>,
}

impl DensityMatrix {
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::NotSquare(m.nrows(), m.ncols()));
        }
        if m.nrows() == 0 {
            return Err(Error::InvalidParameter("matrix dimension must be positive".into()));
        }
        let herm = hermiticity_deviation(&m);
        if herm > CONSTRUCTION_TOL {
            return Err(Error::NotHermitian(herm));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > CONSTRUCTION_TOL || tr.im.abs() > CONSTRUCTION_TOL {
            return Err(Error::InvalidTrace(tr.re));
        }
        let min_eig = hermitian_eigenvalues(&m).into_iter().fold(f64::INFINITY, f64::min);
        if min_eig < -1e-9 {
            return Err(Error::NotPsd(min_eig));
        }
        Ok(Self { m })
    }

    pub fn from_pure(psi: &StateVector) -> Self {
        psi.density()
    }

    /// `I / dim`.
    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            m: DMatrix::identity(dim, dim).scale(1.0 / dim as f64),
        }
    }

    /// Convex combination `Σ w_i ρ_i`; weights must be non-negative and sum to one.
    pub fn mixture(parts: &[(f64, &DensityMatrix)]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidParameter("empty mixture".into()))?;
        let dim = first.1.dim();
        let mut total = 0.0;
        let mut m = DMatrix::zeros(dim, dim);
        for (w, rho) in parts {
            check_same_dim(dim, rho.dim())?;
            if *w < 0.0 {
                return Err(Error::InvalidParameter(format!("negative mixture weight {w}")));
            }
            total += w;
            m += rho.m.scale(*w);
        }
        if (total - 1.0).abs() > CONSTRUCTION_TOL {
            return Err(Error::InvalidParameter(format!("mixture weights sum to {total}")));
        }
        Ok(Self { m })
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn trace(&self) -> f64 {
        self.m.trace().re
    }

    pub fn purity(&self) -> f64 {
        (&self.m * &self.m).trace().re
    }

    /// `⟨ψ|ρ|ψ⟩`.
    pub fn expectation(&self, psi: &StateVector) -> Result<f64> {
        check_same_dim(self.dim(), psi.dim())?;
        let v = psi.as_vector();
        Ok(v.dotc(&(&self.m * v)).re)
    }

    /// `U ρ U†`.
    pub fn conjugate(&self, u: &UnitaryMatrix) -> Result<Self> {
        check_same_dim(self.dim(), u.dim())?;
        Ok(Self {
            m: u.matrix() * &self.m * u.matrix().adjoint(),
        })
    }

    /// Eigenvector of the largest eigenvalue, together with that eigenvalue.
    pub fn principal_state(&self) -> (f64, StateVector) {
        let eig = hermitian_eigen(&self.m);
        let (idx, val) =
            eig.eigenvalues.iter().enumerate().fold(
                (0, f64::NEG_INFINITY),
                |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
            );
        let v = eig.eigenvectors.column(idx).into_owned();
        (
            val,
            StateVector::normalize_vector(v).expect("eigenvector has unit norm"),
        )
    }

    pub(crate) fn from_matrix_unchecked(m: DMatrix<C64>) -> Self {
        Self { m }
    }
}

/// Either a pure state or a density matrix. Used for adversary guesses,
/// which may be mixed when an emulator leaves ancillas entangled.
#[derive(Clone, Debug, PartialEq)]
pub enum QuantumState {
    Pure(StateVector),
    Mixed(DensityMatrix),
}

impl QuantumState {
    pub fn dim(&self) -> usize {
        match self {
            QuantumState::Pure(s) => s.dim(),
            QuantumState::Mixed(r) => r.dim(),
        }
    }

    /// Squared fidelity with a pure state, `⟨ψ|ρ|ψ⟩`.
    pub fn fidelity_with_pure(&self, psi: &StateVector) -> Result<f64> {
        match self {
            QuantumState::Pure(s) => fidelity_pure(s, psi),
            QuantumState::Mixed(r) => Ok(r.expectation(psi)?.clamp(0.0, 1.0)),
        }
    }

    pub fn to_density(&self) -> DensityMatrix {
        match self {
            QuantumState::Pure(s) => s.density(),
            QuantumState::Mixed(r) => r.clone(),
        }
    }
}

/// Orthogonal projector with its orthonormal basis.
#[derive(Clone, Debug)]
pub struct Projector {
    m: DMatrix<C64>,
    basis: Vec<StateVector>,
    dim: usize,
}

impl Projector {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn basis(&self) -> &[StateVector] {
        &self.basis
    }

    /// `⟨ψ|Π|ψ⟩`.
    pub fn overlap(&self, psi: &StateVector) -> Result<f64> {
        check_same_dim(self.dim, psi.dim())?;
        Ok(self
            .basis
            .iter()
            .map(|b| b.as_vector().dotc(psi.as_vector()).norm_sqr())
            .sum())
    }

    /// `Π ψ` as an unnormalized vector.
    pub fn project(&self, psi: &StateVector) -> Result<DVector<C64>> {
        check_same_dim(self.dim, psi.dim())?;
        let mut out = DVector::zeros(self.dim);
        for b in &self.basis {
            let c = b.as_vector().dotc(psi.as_vector());
            out.axpy(c, b.as_vector(), C64::new(1.0, 0.0));
        }
        Ok(out)
    }

    /// Projector onto the first `rank` computational basis states.
    pub fn computational(dim: usize, rank: usize) -> Result<Self> {
        if rank == 0 || rank > dim {
            return Err(Error::InvalidParameter(format!("rank {rank} must lie in 1..={dim}")));
        }
        let states = (0..rank)
            .map(|i| StateVector::basis(dim, i))
            .collect::<Result<Vec<_>>>()?;
        span_projector(&states)
    }
}

/// Kronecker product `a ⊗ b`.
pub fn tensor(a: &StateVector, b: &StateVector) -> Result<StateVector> {
    check_dim_cap(a.dim().saturating_mul(b.dim()))?;
    Ok(StateVector::from_vector_unchecked(a.amps.kronecker(&b.amps)))
}

/// `U ψ`.
pub fn apply(u: &UnitaryMatrix, psi: &StateVector) -> Result<StateVector> {
    check_same_dim(u.dim(), psi.dim())?;
    Ok(StateVector::from_vector_unchecked(u.matrix() * psi.as_vector()))
}

/// `|⟨ψ|φ⟩|²`.
pub fn fidelity_pure(psi: &StateVector, phi: &StateVector) -> Result<f64> {
    Ok(psi.inner(phi)?.norm_sqr().clamp(0.0, 1.0))
}

/// `A` with `m = A A†`, keeping only eigenvalues above round-off level.
///
/// Dropping the noise eigenvalues matters: their square roots would
/// otherwise contribute ~1e-8 to fidelities of rank-deficient states.
fn psd_factor(m: &DMatrix<C64>) -> DMatrix<C64> {
    let eig = hermitian_eigen(m);
    let n = m.nrows();
    let floor = 1e-14 * (n.max(8) as f64);
    let keep: Vec<usize> = (0..n).filter(|&k| eig.eigenvalues[k] > floor).collect();
    DMatrix::from_fn(n, keep.len(), |i, j| {
        let k = keep[j];
        eig.eigenvectors[(i, k)] * eig.eigenvalues[k].sqrt()
    })
}

/// Uhlmann root fidelity `tr √(√ρ σ √ρ)`, computed as the trace norm of
/// `A†B` where `ρ = AA†` and `σ = BB†`.
pub fn root_fidelity_mixed(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    check_same_dim(rho.dim(), sigma.dim())?;
    let a = psd_factor(&rho.m);
    let b = psd_factor(&sigma.m);
    if a.ncols() == 0 || b.ncols() == 0 {
        return Ok(0.0);
    }
    let overlap = a.adjoint() * b;
    let total: f64 = overlap.svd(false, false).singular_values.iter().sum();
    Ok(total.clamp(0.0, 1.0))
}

/// Squared Uhlmann fidelity `(tr √(√ρ σ √ρ))²`.
pub fn fidelity_mixed(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    let f = root_fidelity_mixed(rho, sigma)?;
    Ok((f * f).clamp(0.0, 1.0))
}

/// `½ tr|ρ − σ|`.
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    check_same_dim(rho.dim(), sigma.dim())?;
    let diff = &rho.m - &sigma.m;
    let s: f64 = hermitian_eigenvalues(&diff).into_iter().map(f64::abs).sum();
    Ok((0.5 * s).clamp(0.0, 1.0))
}

/// Reduced density matrix on the subsystems listed in `keep` (in that order).
pub fn partial_trace(rho: &DensityMatrix, dims: &[usize], keep: &[usize]) -> Result<DensityMatrix> {
    let layout = SubsystemLayout::new(dims, keep)?;
    check_same_dim(layout.total(), rho.dim())?;
    let dk = layout.kept_dim();
    let dr = layout.rest_dim();
    let mut out = DMatrix::zeros(dk, dk);
    for r in 0..dr {
        for a in 0..dk {
            let ia = layout.full_index(a, r);
            for b in 0..dk {
                out[(a, b)] += rho.m[(ia, layout.full_index(b, r))];
            }
        }
    }
    Ok(DensityMatrix::from_matrix_unchecked(out))
}

/// Reduced density matrix of a pure joint state, without forming `|ψ⟩⟨ψ|`.
pub fn reduced_density(psi: &StateVector, dims: &[usize], keep: &[usize]) -> Result<DensityMatrix> {
    let layout = SubsystemLayout::new(dims, keep)?;
    check_same_dim(layout.total(), psi.dim())?;
    Ok(DensityMatrix::from_matrix_unchecked(
        layout.reduce_amplitudes(psi.amplitudes()),
    ))
}

/// Orthonormal basis of `span(states)` by modified Gram–Schmidt with one
/// re-orthogonalization pass. Vectors whose residual norm falls below
/// [`RANK_TOL`] are dropped.
pub fn orthonormal_basis(states: &[StateVector]) -> Result<Vec<StateVector>> {
    let first = states
        .first()
        .ok_or_else(|| Error::InvalidParameter("span of an empty list".into()))?;
    let dim = first.dim();
    let mut basis: Vec<DVector<C64>> = Vec::new();
    for s in states {
        check_same_dim(dim, s.dim())?;
        let mut v = s.as_vector().clone();
        for _ in 0..2 {
            for b in &basis {
                let c = b.dotc(&v);
                v.axpy(-c, b, C64::new(1.0, 0.0));
            }
        }
        let n = v.norm();
        if n > RANK_TOL {
            basis.push(v.unscale(n));
        }
    }
    Ok(basis.into_iter().map(StateVector::from_vector_unchecked).collect())
}

/// Orthogonal projector onto `span(states)`.
pub fn span_projector(states: &[StateVector]) -> Result<Projector> {
    let basis = orthonormal_basis(states)?;
    let dim = states[0].dim();
    let mut m = DMatrix::zeros(dim, dim);
    for b in &basis {
        let v = b.as_vector();
        m += v * v.adjoint();
    }
    Ok(Projector { m, basis, dim })
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im)
}

/// Random density matrix of rank at most `rank`: a mixture of Haar states
/// with uniformly drawn weights.
pub fn random_density<R: Rng + ?Sized>(dim: usize, rank: usize, rng: &mut R) -> Result<DensityMatrix> {
    if rank == 0 {
        return Err(Error::InvalidParameter("rank must be positive".into()));
    }
    let weights: Vec<f64> = (0..rank).map(|_| rng.random::<f64>() + 1e-3).collect();
    let total: f64 = weights.iter().sum();
    let mut m = DMatrix::zeros(dim, dim);
    for w in weights {
        let s = haar_state(dim, rng)?;
        m += s.density().matrix().scale(w / total);
    }
    Ok(DensityMatrix::from_matrix_unchecked(m))
}

/// Haar-random pure state: normalized vector of i.i.d. complex Gaussians.
pub fn haar_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<StateVector> {
    if dim == 0 {
        return Err(Error::InvalidParameter("state dimension must be positive".into()));
    }
    check_dim_cap(dim)?;
    let v = DVector::from_iterator(dim, (0..dim).map(|_| complex_gaussian(rng)));
    StateVector::normalize_vector(v)
}

/// Haar-random unitary: QR of a complex Ginibre matrix with the phases of
/// `diag(R)` moved into `Q`, which removes the QR bias.
pub fn haar_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<UnitaryMatrix> {
    if dim == 0 {
        return Err(Error::InvalidParameter("matrix dimension must be positive".into()));
    }
    check_dim_cap(dim)?;
    // Column-major fill keeps the draw order independent of nalgebra internals.
    let z = DMatrix::from_iterator(dim, dim, (0..dim * dim).map(|_| complex_gaussian(rng)));
    let qr = z.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dim {
        let d = r[(j, j)];
        let n = d.norm();
        let phase = if n > 0.0 { d / n } else { C64::new(1.0, 0.0) };
        let mut col = q.column_mut(j);
        col *= phase;
    }
    UnitaryMatrix::new(q)
}

/// Serializable complex number as an `[re, im]` pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexPair(pub [f64; 2]);

impl From<C64> for ComplexPair {
    fn from(z: C64) -> Self {
        ComplexPair([z.re, z.im])
    }
}

impl From<ComplexPair> for C64 {
    fn from(p: ComplexPair) -> Self {
        C64::new(p.0[0], p.0[1])
    }
}
