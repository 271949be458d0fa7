//! qPUF generation and evaluation, the ε-disturbed channel family, and the
//! robustness / uniqueness / collision-resistance checkers.
//!
//! A qPUF on `λ` qubits is a Haar-random unitary on `D = 2^λ` dimensions.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{
    self, fidelity_mixed, haar_unitary, ComplexPair, DensityMatrix, StateVector, UnitaryMatrix, C64, DERIVED_TOL,
};
use crate::rng::rng_from_seed;

/// Largest security parameter accepted by [`qgen`]; the cap on simulated
/// dimension usually bites first.
pub const MAX_LAMBDA: u32 = 14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QPufGenParams {
    /// Security parameter; also the qubit count.
    pub lambda: u32,
    pub seed: u64,
}

impl QPufGenParams {
    pub fn new(lambda: u32, seed: u64) -> Result<Self> {
        if lambda == 0 || lambda > MAX_LAMBDA {
            return Err(Error::InvalidParameter(format!(
                "lambda must lie in 1..={MAX_LAMBDA}, got {lambda}"
            )));
        }
        Ok(Self { lambda, seed })
    }

    pub fn qubits(&self) -> u32 {
        self.lambda
    }

    pub fn dim(&self) -> usize {
        1usize << self.lambda
    }
}

/// A generated qPUF: identifier plus the hidden unitary.
///
/// Adversaries never hold a `QPufInstance`; games hand them an oracle
/// handle that only answers queries.
#[derive(Clone, Debug, PartialEq)]
pub struct QPufInstance {
    id: String,
    qubits: u32,
    unitary: UnitaryMatrix,
}

impl QPufInstance {
    /// Wraps an explicit unitary on `qubits` qubits.
    pub fn from_unitary(id: impl Into<String>, qubits: u32, unitary: UnitaryMatrix) -> Result<Self> {
        if qubits == 0 || qubits > MAX_LAMBDA || unitary.dim() != 1usize << qubits {
            return Err(Error::DimensionMismatch {
                expected: 1usize << qubits.min(MAX_LAMBDA),
                got: unitary.dim(),
            });
        }
        Ok(Self {
            id: id.into(),
            qubits,
            unitary,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn qubits(&self) -> u32 {
        self.qubits
    }

    pub fn dim(&self) -> usize {
        self.unitary.dim()
    }

    pub fn unitary(&self) -> &UnitaryMatrix {
        &self.unitary
    }

    pub fn to_json(&self) -> Result<String> {
        let m = self.unitary.matrix();
        let rows = (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| ComplexPair::from(m[(i, j)])).collect())
            .collect();
        let record = QPufRecord {
            id: self.id.clone(),
            n: self.qubits,
            unitary: rows,
        };
        serde_json::to_string(&record).map_err(|e| Error::Serialization(e.to_string()))
    }

    /// Parses the JSON form and re-validates unitarity.
    pub fn from_json(s: &str) -> Result<Self> {
        let record: QPufRecord = serde_json::from_str(s).map_err(|e| Error::Serialization(e.to_string()))?;
        if record.n == 0 || record.n > MAX_LAMBDA {
            return Err(Error::InvalidParameter(format!("bad qubit count {}", record.n)));
        }
        let dim = 1usize << record.n;
        if record.unitary.len() != dim || record.unitary.iter().any(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: record.unitary.len(),
            });
        }
        let m = DMatrix::from_fn(dim, dim, |i, j| C64::from(record.unitary[i][j]));
        Self::from_unitary(record.id, record.n, UnitaryMatrix::new(m)?)
    }
}

/// On-disk form of a [`QPufInstance`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QPufRecord {
    pub id: String,
    pub n: u32,
    /// Row-major matrix of `[re, im]` pairs.
    pub unitary: Vec<Vec<ComplexPair>>,
}

/// Samples a qPUF whose unitary is Haar-distributed, seeded by `params.seed`.
pub fn qgen(params: QPufGenParams) -> Result<QPufInstance> {
    let mut rng = rng_from_seed(params.seed);
    let unitary = haar_unitary(params.dim(), &mut rng)?;
    Ok(QPufInstance {
        id: format!("qpuf-{}q-{:016x}", params.lambda, params.seed),
        qubits: params.lambda,
        unitary,
    })
}

/// `U_id |ψ⟩`.
pub fn qeval(puf: &QPufInstance, psi: &StateVector) -> Result<StateVector> {
    numerics::apply(&puf.unitary, psi)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RequirementThresholds {
    pub delta_r: f64,
    pub delta_u: f64,
    pub delta_c: f64,
}

impl RequirementThresholds {
    pub fn new(delta_r: f64, delta_u: f64, delta_c: f64) -> Result<Self> {
        for (name, v) in [("delta_r", delta_r), ("delta_u", delta_u), ("delta_c", delta_c)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!("{name} = {v} outside [0, 1]")));
            }
        }
        if delta_c > 1.0 - delta_r + DERIVED_TOL || delta_u > 1.0 - delta_r + DERIVED_TOL {
            return Err(Error::InvalidParameter(
                "thresholds must satisfy delta_c <= 1 - delta_r and delta_u <= 1 - delta_r".into(),
            ));
        }
        Ok(Self {
            delta_r,
            delta_u,
            delta_c,
        })
    }
}

/// The non-unitary part `Ẽ` of an ε-disturbed unitary.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ContractivePart {
    /// `Ẽ(ρ) = I/D`.
    MaximallyMixedReplacer,
    /// `Ẽ(ρ) = (1 − p) UρU† + p I/D`: depolarizing noise after the device unitary.
    Depolarizing { strength: f64 },
}

/// `E(ρ) = (1 − ε) UρU† + ε Ẽ(ρ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct EpsilonDisturbedChannel {
    epsilon: f64,
    unitary: UnitaryMatrix,
    contractive_part: ContractivePart,
}

impl EpsilonDisturbedChannel {
    pub fn new(epsilon: f64, unitary: UnitaryMatrix, contractive_part: ContractivePart) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::InvalidParameter(format!("epsilon {epsilon} outside [0, 1]")));
        }
        if let ContractivePart::Depolarizing { strength } = contractive_part {
            if !(0.0..=1.0).contains(&strength) {
                return Err(Error::InvalidParameter(format!(
                    "depolarizing strength {strength} outside [0, 1]"
                )));
            }
        }
        Ok(Self {
            epsilon,
            unitary,
            contractive_part,
        })
    }

    pub fn unitary_only(unitary: UnitaryMatrix) -> Self {
        Self {
            epsilon: 0.0,
            unitary,
            contractive_part: ContractivePart::MaximallyMixedReplacer,
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn unitary(&self) -> &UnitaryMatrix {
        &self.unitary
    }

    pub fn contractive_part(&self) -> ContractivePart {
        self.contractive_part
    }

    pub fn dim(&self) -> usize {
        self.unitary.dim()
    }

    /// `Ẽ(ρ)`.
    pub fn contractive_output(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        let mixed = DensityMatrix::maximally_mixed(self.dim());
        match self.contractive_part {
            ContractivePart::MaximallyMixedReplacer => {
                if rho.dim() != self.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: self.dim(),
                        got: rho.dim(),
                    });
                }
                Ok(mixed)
            }
            ContractivePart::Depolarizing { strength } => {
                let rotated = rho.conjugate(&self.unitary)?;
                DensityMatrix::mixture(&[(1.0 - strength, &rotated), (strength, &mixed)])
            }
        }
    }

    /// `E(ρ)`.
    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        let rotated = rho.conjugate(&self.unitary)?;
        if self.epsilon == 0.0 {
            return Ok(rotated);
        }
        let noisy = self.contractive_output(rho)?;
        DensityMatrix::mixture(&[(1.0 - self.epsilon, &rotated), (self.epsilon, &noisy)])
    }
}

pub fn channel_apply(ch: &EpsilonDisturbedChannel, rho: &DensityMatrix) -> Result<DensityMatrix> {
    ch.apply(rho)
}

/// Anything that maps density matrices to density matrices: a qPUF or an
/// ε-disturbed channel.
pub trait QuantumMap {
    fn map_dim(&self) -> usize;
    fn map_state(&self, rho: &DensityMatrix) -> Result<DensityMatrix>;
}

impl QuantumMap for QPufInstance {
    fn map_dim(&self) -> usize {
        self.dim()
    }

    fn map_state(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        rho.conjugate(&self.unitary)
    }
}

impl QuantumMap for EpsilonDisturbedChannel {
    fn map_dim(&self) -> usize {
        self.dim()
    }

    fn map_state(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        self.apply(rho)
    }
}

/// Robustness on one pair: the inputs must be `δ_r`-indistinguishable; the
/// outputs must be too.
pub fn check_robustness<M: QuantumMap + ?Sized>(
    map: &M,
    rho: &DensityMatrix,
    sigma: &DensityMatrix,
    delta_r: f64,
) -> Result<bool> {
    let f_in = fidelity_mixed(rho, sigma)?;
    if f_in < delta_r - DERIVED_TOL {
        return Err(Error::Precondition(format!(
            "inputs are not {delta_r}-indistinguishable (F = {f_in})"
        )));
    }
    let f_out = fidelity_mixed(&map.map_state(rho)?, &map.map_state(sigma)?)?;
    Ok(f_out >= delta_r - DERIVED_TOL)
}

/// Strong collision resistance on one pair: the inputs must be
/// `δ_c`-distinguishable; the outputs must be too.
pub fn check_collision<M: QuantumMap + ?Sized>(
    map: &M,
    rho: &DensityMatrix,
    sigma: &DensityMatrix,
    delta_c: f64,
) -> Result<bool> {
    let f_in = fidelity_mixed(rho, sigma)?;
    if f_in > 1.0 - delta_c + DERIVED_TOL {
        return Err(Error::Precondition(format!(
            "inputs are not {delta_c}-distinguishable (F = {f_in})"
        )));
    }
    let f_out = fidelity_mixed(&map.map_state(rho)?, &map.map_state(sigma)?)?;
    Ok(f_out <= 1.0 - delta_c + DERIVED_TOL)
}

/// Eigenvalues of a unitary, via complex Schur form.
pub fn unitary_eigenvalues(u: &UnitaryMatrix) -> Vec<C64> {
    let schur = u.matrix().clone().schur();
    let (_, t) = schur.unpack();
    (0..t.nrows()).map(|i| t[(i, i)]).collect()
}

/// Diamond-norm distance between the channels `ρ ↦ aρa†` and `ρ ↦ bρb†`.
///
/// For unitary channels it equals `2√(1 − δ²)` where `δ` is the distance
/// from the origin to the convex hull of the eigenvalues of `a†b`. The
/// eigenvalues lie on the unit circle; if they all fit in an arc of length
/// `θ < π`, the nearest hull point is the midpoint of the chord spanning the
/// arc and `δ = cos(θ/2)`, otherwise the hull contains the origin.
pub fn unitary_diamond_distance(a: &UnitaryMatrix, b: &UnitaryMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let w = a.adjoint().compose(b)?;
    let mut angles: Vec<f64> = unitary_eigenvalues(&w).iter().map(|z| z.arg()).collect();
    angles.sort_by(|x, y| x.total_cmp(y));
    let mut max_gap = angles[0] + 2.0 * PI - angles[angles.len() - 1];
    for pair in angles.windows(2) {
        max_gap = max_gap.max(pair[1] - pair[0]);
    }
    let arc = 2.0 * PI - max_gap;
    let delta = if arc < PI { (arc / 2.0).cos() } else { 0.0 };
    Ok((2.0 * (1.0 - delta * delta).max(0.0).sqrt()).clamp(0.0, 2.0))
}

pub fn uniqueness_distance(a: &QPufInstance, b: &QPufInstance) -> Result<f64> {
    unitary_diamond_distance(&a.unitary, &b.unitary)
}
