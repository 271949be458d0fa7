//! Quantum equality tests used by the challenger to judge a guess.
//!
//! `SwapAllPass` runs `c = min(κ1, κ2)` SWAP tests and accepts only if all
//! of them pass, so its acceptance probability is `((1 + F)/2)^c` and its
//! false-accept rate on orthogonal states is `2^-c`. `IdealThreshold(δ)`
//! accepts exactly when `F ≥ δ`.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{fidelity_pure, QuantumState, Register, StateVector, C64};

/// Largest dimension for which the explicit controlled-SWAP circuit is built.
pub const CIRCUIT_MAX_DIM: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum TestKind {
    SwapAllPass,
    IdealThreshold(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    pub kind: TestKind,
    pub kappa1: usize,
    pub kappa2: usize,
}

impl TestConfig {
    pub fn new(kind: TestKind, kappa1: usize, kappa2: usize) -> Result<Self> {
        if kappa1 == 0 || kappa2 == 0 {
            return Err(Error::InvalidParameter("copy counts must be at least 1".into()));
        }
        if let TestKind::IdealThreshold(delta) = kind {
            if !(delta > 0.0 && delta <= 1.0) {
                return Err(Error::InvalidParameter(format!("threshold {delta} outside (0, 1]")));
            }
        }
        Ok(Self { kind, kappa1, kappa2 })
    }

    pub fn ideal(delta: f64) -> Result<Self> {
        Self::new(TestKind::IdealThreshold(delta), 1, 1)
    }

    pub fn swap(kappa1: usize, kappa2: usize) -> Result<Self> {
        Self::new(TestKind::SwapAllPass, kappa1, kappa2)
    }

    /// Number of SWAP tests a `SwapAllPass` run performs.
    pub fn pairs(&self) -> usize {
        self.kappa1.min(self.kappa2)
    }

    /// Exact acceptance probability for a guess at fidelity `f`.
    pub fn acceptance_probability(&self, f: f64) -> f64 {
        match self.kind {
            TestKind::SwapAllPass => ((1.0 + f) / 2.0).powi(self.pairs() as i32),
            TestKind::IdealThreshold(delta) => {
                if f >= delta {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub accepted: bool,
    pub pass_count: usize,
    pub pairs_run: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SwapMode {
    /// Bernoulli draw with the exact pass probability.
    Analytic,
    /// Explicit ancilla + controlled-SWAP circuit, measured.
    Circuit,
}

fn check_dims(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch { expected: a, got: b });
    }
    Ok(())
}

fn bernoulli<R: Rng + ?Sized>(p: f64, rng: &mut R) -> bool {
    rng.random::<f64>() < p
}

/// One SWAP test; passes with probability `(1 + |⟨ψ|φ⟩|²)/2`.
pub fn swap_test_once<R: Rng + ?Sized>(psi: &StateVector, phi: &StateVector, rng: &mut R) -> Result<bool> {
    let f = fidelity_pure(psi, phi)?;
    Ok(bernoulli((1.0 + f) / 2.0, rng))
}

fn swap_matrix(d: usize) -> DMatrix<C64> {
    let mut m = DMatrix::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            m[(j * d + i, i * d + j)] = C64::new(1.0, 0.0);
        }
    }
    m
}

/// Probability that the explicit circuit `H · CSWAP · H` leaves the
/// ancilla in `|0⟩`.
pub fn swap_circuit_pass_probability(psi: &StateVector, phi: &StateVector) -> Result<f64> {
    check_dims(psi.dim(), phi.dim())?;
    let d = psi.dim();
    if d > CIRCUIT_MAX_DIM {
        return Err(Error::UnsupportedMode(format!(
            "circuit SWAP test limited to dimension {CIRCUIT_MAX_DIM}"
        )));
    }
    let h = {
        let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        DMatrix::from_row_slice(2, 2, &[s, s, s, -s])
    };
    let pair = crate::numerics::tensor(psi, phi)?;
    let mut reg = Register::product(&[&StateVector::basis(2, 0)?, &pair])?;
    reg.apply(0, &h)?;
    reg.apply_controlled(0, 1, &swap_matrix(d))?;
    reg.apply(0, &h)?;
    reg.outcome_probability(0, 0)
}

/// One SWAP test through the explicit circuit.
pub fn swap_test_circuit<R: Rng + ?Sized>(psi: &StateVector, phi: &StateVector, rng: &mut R) -> Result<bool> {
    let p = swap_circuit_pass_probability(psi, phi)?;
    Ok(bernoulli(p, rng))
}

/// Runs the configured test on the true response and a (possibly mixed)
/// guess. For a mixed guess the SWAP pass probability is `(1 + ⟨t|ρ|t⟩)/2`.
pub fn run_test<R: Rng + ?Sized>(
    cfg: &TestConfig,
    target: &StateVector,
    guess: &QuantumState,
    rng: &mut R,
) -> Result<TestOutcome> {
    check_dims(target.dim(), guess.dim())?;
    let f = guess.fidelity_with_pure(target)?;
    Ok(match cfg.kind {
        TestKind::SwapAllPass => {
            let pairs_run = cfg.pairs();
            let pass_count = (0..pairs_run).filter(|_| bernoulli((1.0 + f) / 2.0, rng)).count();
            TestOutcome {
                accepted: pass_count == pairs_run,
                pass_count,
                pairs_run,
            }
        }
        TestKind::IdealThreshold(delta) => {
            let accepted = f >= delta;
            TestOutcome {
                accepted,
                pass_count: accepted as usize,
                pairs_run: 1,
            }
        }
    })
}

/// As [`run_test`] for pure guesses, with the SWAP tests run in `mode`.
pub fn run_test_with_mode<R: Rng + ?Sized>(
    cfg: &TestConfig,
    target: &StateVector,
    guess: &StateVector,
    mode: SwapMode,
    rng: &mut R,
) -> Result<TestOutcome> {
    match (cfg.kind, mode) {
        (TestKind::SwapAllPass, SwapMode::Circuit) => {
            let p = swap_circuit_pass_probability(target, guess)?;
            let pairs_run = cfg.pairs();
            let pass_count = (0..pairs_run).filter(|_| bernoulli(p, rng)).count();
            Ok(TestOutcome {
                accepted: pass_count == pairs_run,
                pass_count,
                pairs_run,
            })
        }
        _ => run_test(cfg, target, &QuantumState::Pure(guess.clone()), rng),
    }
}
