//! Concrete adversaries for the unforgeability games.
//!
//! - [`QeForger`]: existential forger that queries `φ1` and a superposition
//!   `φ2` of `φ1` and the challenge `φ3`, then emulates `Uφ3`.
//! - [`SubspaceAdversary`]: selective adversary that knows the map exactly on
//!   the span of its queries and guesses Haar-randomly outside it.
//! - [`RandomGuesser`]: outputs a Haar-random state.
//! - [`TomographyAdversary`]: reconstructs the whole unitary from `2^n`
//!   basis queries; needs a [`PrivilegedReadout`] grant.

use nalgebra::{DMatrix, DVector};

use crate::emulator::{run_full, run_full_sampled, QeConfig, QeRunResult};
use crate::error::{Error, Result};
use crate::games::{Adversary, Challenge, Oracle};
use crate::numerics::{self, haar_state, QuantumState, StateVector, UnitaryMatrix, C64, CONSTRUCTION_TOL, RANK_TOL};
use crate::qpuf::{qeval, QPufInstance};
use crate::rng::SimRng;

/// Largest μ the forger accepts on `n` qubits: `1 − 4^-n`.
pub fn mu_margin_cap(qubits: u32) -> f64 {
    1.0 - 0.25f64.powi(qubits as i32)
}

/// `(1 − μ)(1 + 4μ(1 − μ))` taken literally for every μ.
pub fn literal_forgery_bound(mu: f64) -> f64 {
    (1.0 - mu) * (1.0 + 4.0 * mu * (1.0 - mu))
}

/// The forger's guaranteed fidelity `α²(1 + 4α²β²)` with `α`, `β` as the
/// plan sets them for `mu`: 1 for `μ ≤ ½`, `(1 − μ)(1 + 4μ(1 − μ))` above.
pub fn forgery_bound(mu: f64) -> f64 {
    if mu <= 0.5 {
        1.0
    } else {
        literal_forgery_bound(mu)
    }
}

/// States used by the existential forger.
#[derive(Clone, Debug, PartialEq)]
pub struct ForgerPlan {
    phi1: StateVector,
    phi2: StateVector,
    phi3: StateVector,
    mu: f64,
    alpha: f64,
    beta: f64,
}

impl ForgerPlan {
    /// `φ2 = (φ1 + φ3)/√2` for `μ ≤ ½`, else `√μ φ1 + √(1 − μ) φ3`.
    pub fn new(mu: f64, phi1: StateVector, phi3: StateVector) -> Result<Self> {
        if !(0.0..=1.0).contains(&mu) {
            return Err(Error::InvalidParameter(format!("mu {mu} outside [0, 1]")));
        }
        let overlap = phi1.inner(&phi3)?.norm();
        if overlap > CONSTRUCTION_TOL {
            return Err(Error::InvalidParameter(format!(
                "phi1 and phi3 must be orthogonal (overlap {overlap})"
            )));
        }
        let (a, b) = if mu <= 0.5 {
            (std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2)
        } else {
            (mu.sqrt(), (1.0 - mu).sqrt())
        };
        let phi2 = StateVector::normalize_vector(phi1.as_vector().scale(a) + phi3.as_vector().scale(b))?;
        let alpha = phi2.inner(&phi3)?.norm();
        let beta = phi2.inner(&phi1)?.norm();
        Ok(Self {
            phi1,
            phi2,
            phi3,
            mu,
            alpha,
            beta,
        })
    }

    /// `φ1 = |0⟩`, `φ3 = |1⟩`.
    pub fn standard(dim: usize, mu: f64) -> Result<Self> {
        Self::new(mu, StateVector::basis(dim, 0)?, StateVector::basis(dim, 1)?)
    }

    pub fn phi1(&self) -> &StateVector {
        &self.phi1
    }

    pub fn phi2(&self) -> &StateVector {
        &self.phi2
    }

    pub fn phi3(&self) -> &StateVector {
        &self.phi3
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// `|⟨φ2|φ3⟩|`.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `|⟨φ2|φ1⟩|`.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Exact Stage-2 success probability `⟨φ2|ρ_sys|φ2⟩ = α²(1 + 4β⁴)`,
    /// which also lower-bounds the output fidelity.
    pub fn predicted_reference_overlap(&self) -> f64 {
        self.alpha.powi(2) * (1.0 + 4.0 * self.beta.powi(4))
    }

    pub fn predicted_p_succ_stage1(&self) -> f64 {
        self.predicted_reference_overlap().powi(2)
    }

    /// `α²(1 + 4α²β²)` for this plan's α, β.
    pub fn theory_bound(&self) -> f64 {
        self.alpha.powi(2) * (1.0 + 4.0 * self.alpha.powi(2) * self.beta.powi(2))
    }

    /// Emulator configuration from the two learned pairs, reference `φ2`.
    pub fn emulator_config(&self, out1: StateVector, out2: StateVector, post_select: bool) -> Result<QeConfig> {
        QeConfig::new(
            vec![self.phi1.clone(), self.phi2.clone()],
            vec![out1, out2],
            1,
            post_select,
        )
    }
}

/// Outcome of running the forger's emulation directly against a qPUF.
#[derive(Clone, Debug, PartialEq)]
pub struct ForgeReport {
    pub fidelity: f64,
    pub p_succ_stage1: f64,
    pub stage2_success_probability: f64,
    pub theory_bound: f64,
}

/// Runs the forger's emulation on `puf` and measures the post-selected
/// fidelity against `Uφ3`.
pub fn forge_once(puf: &QPufInstance, plan: &ForgerPlan) -> Result<ForgeReport> {
    let cfg = plan.emulator_config(qeval(puf, plan.phi1())?, qeval(puf, plan.phi2())?, true)?;
    let target = qeval(puf, plan.phi3())?;
    let res = run_full(&cfg, plan.phi3())?.with_target(&target)?;
    Ok(ForgeReport {
        fidelity: res.fidelity_vs_target.unwrap_or(0.0),
        p_succ_stage1: res.p_succ_stage1,
        stage2_success_probability: res.stage2_success_probability,
        theory_bound: plan.theory_bound(),
    })
}

/// Existential forger.
pub struct QeForger {
    mu: f64,
    states: Option<(StateVector, StateVector)>,
    sampled: bool,
    plan: Option<ForgerPlan>,
    outputs: Vec<StateVector>,
    last_run: Option<QeRunResult>,
}

impl QeForger {
    pub fn new(mu: f64) -> Self {
        Self {
            mu,
            states: None,
            sampled: false,
            plan: None,
            outputs: Vec::new(),
            last_run: None,
        }
    }

    /// Uses `phi1`, `phi3` instead of `|0⟩`, `|1⟩`.
    pub fn with_states(mut self, phi1: StateVector, phi3: StateVector) -> Self {
        self.states = Some((phi1, phi3));
        self
    }

    /// Samples the Stage-2 measurement instead of conditioning on success.
    /// A failed measurement is not retried; the failure-branch output is
    /// submitted.
    pub fn sampled(mut self, sampled: bool) -> Self {
        self.sampled = sampled;
        self
    }

    pub fn plan(&self) -> Option<&ForgerPlan> {
        self.plan.as_ref()
    }

    pub fn last_run(&self) -> Option<&QeRunResult> {
        self.last_run.as_ref()
    }
}

impl Adversary for QeForger {
    fn name(&self) -> &str {
        "qe-forger"
    }

    fn learn(&mut self, oracle: &mut Oracle<'_>, _rng: &mut SimRng) -> Result<()> {
        let cap = mu_margin_cap(oracle.qubits());
        if self.mu > cap {
            return Err(Error::InvalidParameter(format!(
                "mu {} above the forger's cap {cap}",
                self.mu
            )));
        }
        let plan = match &self.states {
            Some((a, b)) => ForgerPlan::new(self.mu, a.clone(), b.clone())?,
            None => ForgerPlan::standard(oracle.dim(), self.mu)?,
        };
        self.outputs = vec![oracle.query(plan.phi1())?, oracle.query(plan.phi2())?];
        self.plan = Some(plan);
        Ok(())
    }

    fn choose_challenge(&mut self, _mu: f64, _rng: &mut SimRng) -> Result<StateVector> {
        self.plan
            .as_ref()
            .map(|p| p.phi3().clone())
            .ok_or_else(|| Error::Precondition("forger has not learned yet".into()))
    }

    fn respond(&mut self, challenge: Challenge, rng: &mut SimRng) -> Result<QuantumState> {
        let plan = self
            .plan
            .as_ref()
            .ok_or_else(|| Error::Precondition("forger has not learned yet".into()))?;
        let psi = match challenge {
            Challenge::Chosen(s) | Challenge::Described(s) => s,
            Challenge::Copy(_) => return Err(Error::UnsupportedMode("the forger only plays existential games".into())),
        };
        let cfg = plan.emulator_config(self.outputs[0].clone(), self.outputs[1].clone(), true)?;
        let res = if self.sampled {
            run_full_sampled(&cfg, &psi, rng)?
        } else {
            run_full(&cfg, &psi)?
        };
        let guess = QuantumState::Mixed(res.output.clone());
        self.last_run = Some(res);
        Ok(guess)
    }
}

/// Orthonormal basis of the learned input span together with its exact
/// image under the qPUF.
#[derive(Clone, Debug, PartialEq)]
pub struct SubspaceKnowledge {
    basis_in: Vec<StateVector>,
    basis_out: Vec<StateVector>,
}

impl SubspaceKnowledge {
    /// Orthonormalizes the inputs by Gram–Schmidt and applies the same linear
    /// combinations to the outputs, which stay orthonormal because the map is
    /// unitary.
    pub fn from_pairs(inputs: &[StateVector], outputs: &[StateVector]) -> Result<Self> {
        if inputs.len() != outputs.len() {
            return Err(Error::InvalidParameter("inputs and outputs differ in length".into()));
        }
        let mut basis_in: Vec<DVector<C64>> = Vec::new();
        let mut basis_out: Vec<DVector<C64>> = Vec::new();
        for (x, y) in inputs.iter().zip(outputs) {
            let mut v = x.as_vector().clone();
            let mut w = y.as_vector().clone();
            for _ in 0..2 {
                for (e, f) in basis_in.iter().zip(&basis_out) {
                    let c = e.dotc(&v);
                    v.axpy(-c, e, C64::new(1.0, 0.0));
                    w.axpy(-c, f, C64::new(1.0, 0.0));
                }
            }
            let n = v.norm();
            if n > RANK_TOL {
                basis_in.push(v.unscale(n));
                basis_out.push(w.unscale(n));
            }
        }
        let wrap = |vs: Vec<DVector<C64>>| {
            vs.into_iter()
                .map(StateVector::normalize_vector)
                .collect::<Result<Vec<_>>>()
        };
        Ok(Self {
            basis_in: wrap(basis_in)?,
            basis_out: wrap(basis_out)?,
        })
    }

    pub fn d(&self) -> usize {
        self.basis_in.len()
    }

    pub fn basis_in(&self) -> &[StateVector] {
        &self.basis_in
    }

    pub fn basis_out(&self) -> &[StateVector] {
        &self.basis_out
    }

    /// Guess for `psi`: the exact image of its in-span part plus a Haar
    /// state in the complement of the output span, weighted by the norm of
    /// the out-of-span part.
    pub fn guess(&self, psi: &StateVector, rng: &mut SimRng) -> Result<StateVector> {
        let dim = psi.dim();
        let mut image = DVector::<C64>::zeros(dim);
        let mut in_span = DVector::<C64>::zeros(dim);
        for (e, f) in self.basis_in.iter().zip(&self.basis_out) {
            let c = e.inner(psi)?;
            image += f.as_vector() * c;
            in_span += e.as_vector() * c;
        }
        let residual = (psi.as_vector() - in_span).norm();
        if residual > RANK_TOL && self.d() < dim {
            let mut h = haar_state(dim, rng)?.into_vector();
            for _ in 0..2 {
                for f in &self.basis_out {
                    let c = f.as_vector().dotc(&h);
                    h.axpy(-c, f.as_vector(), C64::new(1.0, 0.0));
                }
            }
            let hn = h.norm();
            image += h.scale(residual / hn);
        }
        StateVector::normalize_vector(image)
    }
}

/// Selective adversary granted the classical description of the challenge
/// and full knowledge of the map on its learned span.
pub struct SubspaceAdversary {
    d: usize,
    queries: Option<Vec<StateVector>>,
    knowledge: Option<SubspaceKnowledge>,
}

impl SubspaceAdversary {
    /// Queries the first `d` computational basis states.
    pub fn new(d: usize) -> Self {
        Self {
            d,
            queries: None,
            knowledge: None,
        }
    }

    pub fn with_queries(queries: Vec<StateVector>) -> Self {
        Self {
            d: queries.len(),
            queries: Some(queries),
            knowledge: None,
        }
    }

    /// Skips learning and uses the supplied knowledge.
    pub fn with_knowledge(knowledge: SubspaceKnowledge) -> Self {
        Self {
            d: knowledge.d(),
            queries: Some(Vec::new()),
            knowledge: Some(knowledge),
        }
    }

    pub fn knowledge(&self) -> Option<&SubspaceKnowledge> {
        self.knowledge.as_ref()
    }
}

impl Adversary for SubspaceAdversary {
    fn name(&self) -> &str {
        "subspace"
    }

    fn learn(&mut self, oracle: &mut Oracle<'_>, _rng: &mut SimRng) -> Result<()> {
        if self.knowledge.is_some() {
            return Ok(());
        }
        let queries = match &self.queries {
            Some(q) => q.clone(),
            None => {
                if self.d > oracle.dim() {
                    return Err(Error::InvalidParameter(format!(
                        "d = {} exceeds the dimension {}",
                        self.d,
                        oracle.dim()
                    )));
                }
                (0..self.d)
                    .map(|i| StateVector::basis(oracle.dim(), i))
                    .collect::<Result<Vec<_>>>()?
            }
        };
        let outputs = queries.iter().map(|q| oracle.query(q)).collect::<Result<Vec<_>>>()?;
        self.knowledge = Some(SubspaceKnowledge::from_pairs(&queries, &outputs)?);
        Ok(())
    }

    fn choose_challenge(&mut self, _mu: f64, rng: &mut SimRng) -> Result<StateVector> {
        let k = self
            .knowledge
            .as_ref()
            .ok_or_else(|| Error::Precondition("adversary has not learned yet".into()))?;
        let dim = k
            .basis_in
            .first()
            .map(|s| s.dim())
            .ok_or_else(|| Error::Precondition("existential play needs at least one learned state".into()))?;
        haar_state(dim, rng)
    }

    fn wants_challenge_description(&self) -> bool {
        true
    }

    fn respond(&mut self, challenge: Challenge, rng: &mut SimRng) -> Result<QuantumState> {
        let k = self
            .knowledge
            .as_ref()
            .ok_or_else(|| Error::Precondition("adversary has not learned yet".into()))?;
        match challenge {
            Challenge::Chosen(psi) | Challenge::Described(psi) => Ok(QuantumState::Pure(k.guess(&psi, rng)?)),
            Challenge::Copy(_) => Err(Error::UnsupportedMode(
                "the subspace adversary needs the challenge description".into(),
            )),
        }
    }
}

/// Ignores everything and outputs a Haar-random state.
#[derive(Default)]
pub struct RandomGuesser {
    dim: Option<usize>,
}

impl RandomGuesser {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Adversary for RandomGuesser {
    fn name(&self) -> &str {
        "random"
    }

    fn learn(&mut self, oracle: &mut Oracle<'_>, _rng: &mut SimRng) -> Result<()> {
        self.dim = Some(oracle.dim());
        Ok(())
    }

    fn choose_challenge(&mut self, _mu: f64, rng: &mut SimRng) -> Result<StateVector> {
        let dim = self
            .dim
            .ok_or_else(|| Error::Precondition("dimension unknown before learning".into()))?;
        haar_state(dim, rng)
    }

    fn respond(&mut self, challenge: Challenge, rng: &mut SimRng) -> Result<QuantumState> {
        let dim = match &challenge {
            Challenge::Chosen(s) | Challenge::Described(s) => s.dim(),
            Challenge::Copy(c) => c.dim(),
        };
        Ok(QuantumState::Pure(haar_state(dim, rng)?))
    }
}

/// Grant for exact readout of response amplitudes. Stands in for the
/// exponential cost of full process tomography.
#[derive(Clone, Copy, Debug)]
pub struct PrivilegedReadout {
    _grant: (),
}

impl PrivilegedReadout {
    pub fn grant() -> Self {
        Self { _grant: () }
    }
}

/// Queries every computational basis state and reads the responses out
/// exactly, recovering the unitary column by column.
pub struct TomographyAdversary {
    _readout: PrivilegedReadout,
    reconstructed: Option<UnitaryMatrix>,
}

impl TomographyAdversary {
    pub fn new(readout: PrivilegedReadout) -> Self {
        Self {
            _readout: readout,
            reconstructed: None,
        }
    }

    pub fn reconstructed(&self) -> Option<&UnitaryMatrix> {
        self.reconstructed.as_ref()
    }

    fn unitary(&self) -> Result<&UnitaryMatrix> {
        self.reconstructed
            .as_ref()
            .ok_or_else(|| Error::Precondition("tomography has not run".into()))
    }
}

impl Adversary for TomographyAdversary {
    fn name(&self) -> &str {
        "tomography"
    }

    fn learn(&mut self, oracle: &mut Oracle<'_>, _rng: &mut SimRng) -> Result<()> {
        let dim = oracle.dim();
        if oracle.remaining() < dim {
            return Err(Error::InsufficientBudget {
                budget: oracle.remaining(),
                needed: dim,
            });
        }
        let mut m = DMatrix::<C64>::zeros(dim, dim);
        for j in 0..dim {
            let col = oracle.query(&StateVector::basis(dim, j)?)?;
            m.set_column(j, col.as_vector());
        }
        self.reconstructed = Some(UnitaryMatrix::new(m)?);
        Ok(())
    }

    fn choose_challenge(&mut self, _mu: f64, _rng: &mut SimRng) -> Result<StateVector> {
        StateVector::uniform(self.unitary()?.dim())
    }

    fn respond(&mut self, challenge: Challenge, _rng: &mut SimRng) -> Result<QuantumState> {
        let u = self.unitary()?;
        match challenge {
            Challenge::Chosen(s) | Challenge::Described(s) => Ok(QuantumState::Pure(numerics::apply(u, &s)?)),
            Challenge::Copy(mut copy) => {
                copy.apply_unitary(u)?;
                Ok(copy.submit())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::{estimate_win_rate, run_game, GameConfig, GameMode};
    use crate::numerics::{fidelity_pure, haar_unitary};
    use crate::qpuf::{qgen, QPufGenParams};
    use crate::rng::rng_from_seed;
    use crate::testers::TestConfig;

    fn puf(n: u32, seed: u64) -> QPufInstance {
        qgen(QPufGenParams::new(n, seed).unwrap()).unwrap()
    }

    #[test]
    fn plan_invariants() {
        for mu in [0.0, 0.3, 0.5, 0.6, 0.75, 0.9] {
            let p = ForgerPlan::standard(4, mu).unwrap();
            assert!((p.alpha().powi(2) + p.beta().powi(2) - 1.0).abs() < 1e-10);
            assert!(p.phi1().inner(p.phi3()).unwrap().norm() < 1e-10);
            let f23 = fidelity_pure(p.phi2(), p.phi3()).unwrap();
            if mu > 0.5 {
                assert!((f23 - (1.0 - mu)).abs() < 1e-12);
            } else {
                assert!((f23 - 0.5).abs() < 1e-12);
            }
            assert!((p.theory_bound() - forgery_bound(mu)).abs() < 1e-12);
        }
        assert!(ForgerPlan::new(0.5, StateVector::basis(2, 0).unwrap(), StateVector::uniform(2).unwrap()).is_err());
    }

    #[test]
    fn bound_values() {
        assert!((literal_forgery_bound(0.75) - 0.25 * 1.75).abs() < 1e-15);
        assert!((forgery_bound(0.75) - 0.4375).abs() < 1e-15);
        assert_eq!(forgery_bound(0.1), 1.0);
        assert!(literal_forgery_bound(0.1) > 1.0);
        assert!((mu_margin_cap(2) - 0.9375).abs() < 1e-15);
    }

    #[test]
    fn forger_meets_bound() {
        for n in [2, 3] {
            for seed in 0..5 {
                let u = puf(n, seed);
                for i in 0..10 {
                    let mu = i as f64 / 10.0;
                    let plan = ForgerPlan::standard(u.dim(), mu).unwrap();
                    let r = forge_once(&u, &plan).unwrap();
                    assert!(
                        r.fidelity >= r.theory_bound - 1e-8,
                        "n {n} mu {mu}: {} < {}",
                        r.fidelity,
                        r.theory_bound
                    );
                    assert!(r.fidelity >= plan.predicted_reference_overlap() - 1e-8);
                    assert!((r.p_succ_stage1 - plan.predicted_p_succ_stage1()).abs() < 1e-10);
                    if mu <= 0.5 {
                        assert!(r.fidelity > 1.0 - 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn forger_with_custom_states() {
        let mut rng = rng_from_seed(3);
        let u = puf(3, 4);
        let a = haar_state(8, &mut rng).unwrap();
        let b0 = haar_state(8, &mut rng).unwrap();
        let b = StateVector::normalize_vector(b0.as_vector() - a.as_vector() * a.inner(&b0).unwrap()).unwrap();
        let plan = ForgerPlan::new(0.8, a, b).unwrap();
        let r = forge_once(&u, &plan).unwrap();
        assert!(r.fidelity >= r.theory_bound - 1e-8);
    }

    #[test]
    fn forger_wins_existential_game_at_half() {
        let cfg = GameConfig::new(
            GameMode::QEx { mu: 0.5 },
            2,
            TestConfig::swap(20, 20).unwrap(),
            QPufGenParams::new(3, 0).unwrap(),
            1,
        )
        .unwrap();
        let rate = estimate_win_rate(&cfg, || Box::new(QeForger::new(0.5)), 30).unwrap();
        assert_eq!(rate.rate, 1.0);
    }

    #[test]
    fn forger_respects_mu_cap() {
        let cfg = GameConfig::new(
            GameMode::QEx { mu: 0.99 },
            2,
            TestConfig::ideal(0.5).unwrap(),
            QPufGenParams::new(2, 0).unwrap(),
            1,
        )
        .unwrap();
        assert!(matches!(
            run_game(&cfg, &mut QeForger::new(0.99)),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn sampled_forger_reports_failures() {
        let cfg = GameConfig::new(
            GameMode::QEx { mu: 0.9 },
            2,
            TestConfig::ideal(0.5).unwrap(),
            QPufGenParams::new(2, 0).unwrap(),
            0,
        )
        .unwrap();
        let mut failures = 0;
        for t in 0..40 {
            let mut f = QeForger::new(0.9).sampled(true);
            run_game(&cfg.for_trial(t), &mut f).unwrap();
            if f.last_run().unwrap().stage2 == crate::emulator::Stage2Outcome::Failure {
                failures += 1;
            }
        }
        // success probability (0.1)(1 + 4·0.81) ≈ 0.42
        assert!(failures > 5 && failures < 40, "failures {failures}");
    }

    #[test]
    fn subspace_knowledge_is_orthonormal_and_consistent() {
        let mut rng = rng_from_seed(5);
        let u = haar_unitary(8, &mut rng).unwrap();
        let inputs: Vec<_> = (0..4).map(|_| haar_state(8, &mut rng).unwrap()).collect();
        let mut with_dup = inputs.clone();
        with_dup.push(inputs[0].clone());
        let outputs: Vec<_> = with_dup.iter().map(|s| numerics::apply(&u, s).unwrap()).collect();
        let k = SubspaceKnowledge::from_pairs(&with_dup, &outputs).unwrap();
        assert_eq!(k.d(), 4);
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((k.basis_in()[i].inner(&k.basis_in()[j]).unwrap().norm() - expect).abs() < 1e-9);
                assert!((k.basis_out()[i].inner(&k.basis_out()[j]).unwrap().norm() - expect).abs() < 1e-9);
            }
            let mapped = numerics::apply(&u, &k.basis_in()[i]).unwrap();
            assert!((fidelity_pure(&mapped, &k.basis_out()[i]).unwrap() - 1.0).abs() < 1e-9);
        }
        let coeffs = [0.3, -0.5, 0.1, 0.8];
        let v = inputs
            .iter()
            .zip(coeffs)
            .fold(DVector::zeros(8), |acc, (s, c)| acc + s.as_vector().scale(c));
        let psi = StateVector::normalize_vector(v).unwrap();
        let g = k.guess(&psi, &mut rng).unwrap();
        assert!((fidelity_pure(&g, &numerics::apply(&u, &psi).unwrap()).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn empty_knowledge_guesses_like_random() {
        let mut rng = rng_from_seed(6);
        let k = SubspaceKnowledge::from_pairs(&[], &[]).unwrap();
        let target = StateVector::basis(16, 3).unwrap();
        let n = 20_000;
        let mean = (0..n)
            .map(|_| fidelity_pure(&k.guess(&target, &mut rng).unwrap(), &target).unwrap())
            .sum::<f64>()
            / n as f64;
        let sigma = (15.0 / (256.0 * 17.0) / n as f64).sqrt();
        assert!((mean - 1.0 / 16.0).abs() <= 3.0 * sigma, "mean {mean}");
    }

    #[test]
    fn random_guesser_mean_fidelity_and_determinism() {
        let mut g = RandomGuesser::new();
        let target = StateVector::basis(2, 0).unwrap();
        let mut rng = rng_from_seed(7);
        let n = 20_000;
        let mean = (0..n)
            .map(|_| {
                g.respond(Challenge::Described(target.clone()), &mut rng)
                    .unwrap()
                    .fidelity_with_pure(&target)
                    .unwrap()
            })
            .sum::<f64>()
            / n as f64;
        let sigma = (1.0 / 12.0 / n as f64).sqrt();
        assert!((mean - 0.5).abs() <= 3.0 * sigma);
        let a = g
            .respond(Challenge::Described(target.clone()), &mut rng_from_seed(1))
            .unwrap();
        let b = g
            .respond(Challenge::Described(target.clone()), &mut rng_from_seed(1))
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn tomography_reconstructs_and_wins() {
        let cfg = GameConfig::new(
            GameMode::QSel,
            4,
            TestConfig::ideal(0.99).unwrap(),
            QPufGenParams::new(2, 21).unwrap(),
            3,
        )
        .unwrap();
        let mut adv = TomographyAdversary::new(PrivilegedReadout::grant());
        let t = run_game(&cfg, &mut adv).unwrap();
        assert!(t.won());
        let hidden = puf(2, 21);
        let dev = (adv.reconstructed().unwrap().matrix() - hidden.unitary().matrix())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        assert!(dev <= 1e-9);

        let short = GameConfig::new(
            GameMode::QSel,
            3,
            TestConfig::ideal(0.99).unwrap(),
            QPufGenParams::new(2, 21).unwrap(),
            3,
        )
        .unwrap();
        assert_eq!(
            run_game(&short, &mut TomographyAdversary::new(PrivilegedReadout::grant())).unwrap_err(),
            Error::InsufficientBudget { budget: 3, needed: 4 }
        );
    }
}
