//! Universal quantum emulator.
//!
//! Given learned input/output sample pairs `(φ_i, Uφ_i)` and a reference
//! sample `φ_r`, the emulator approximates `Uψ` for a fresh input `ψ`
//! without ever applying `U`:
//!
//! 1. Stage 1 runs one block `W(i) = R_c(φ_i) H R_c(φ_r)` per non-reference
//!    sample, each on a fresh ancilla prepared in `|−⟩`. This rotates the
//!    component of `ψ` inside the sample span onto `φ_r`.
//! 2. Stage 2 applies `R_c(φ_r)` and `H` to one more `|−⟩` ancilla and
//!    measures it; outcome 0 leaves the system exactly in `φ_r`.
//! 3. Stage 3 swaps the system with a register holding `Uφ_r`.
//! 4. Stage 4 undoes Stage 1 on the output side with the inverse blocks
//!    `W^out(i)† = R_c(φ_r^out) H R_c(φ_i^out)`, last block first.
//!
//! Register layout for a full run: `[system, anc_1 … anc_m, stage-2 ancilla,
//! swap register]`, with subsystem 0 the most significant digit.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{fidelity_mixed, tensor, DensityMatrix, Register, StateVector, UnitaryMatrix, C64};

/// Probability below which conditioning on Stage-2 success is refused.
pub const POST_SELECTION_FLOOR: f64 = 1e-12;
/// Coefficients at or below this magnitude are dropped from closed-form terms.
pub const TERM_PRUNE_TOL: f64 = 1e-13;

fn hadamard() -> DMatrix<C64> {
    let h = C64::new(FRAC_1_SQRT_2, 0.0);
    DMatrix::from_row_slice(2, 2, &[h, h, h, -h])
}

fn minus_state() -> StateVector {
    StateVector::new(vec![C64::new(FRAC_1_SQRT_2, 0.0), C64::new(-FRAC_1_SQRT_2, 0.0)]).expect("|−⟩ is normalized")
}

/// `R(φ) = I − 2|φ⟩⟨φ|`.
pub fn reflection(phi: &StateVector) -> DMatrix<C64> {
    let v = phi.as_vector();
    DMatrix::identity(phi.dim(), phi.dim()) - (v * v.adjoint()).scale(2.0)
}

/// `R_c(φ) = |0⟩⟨0| ⊗ I + |1⟩⟨1| ⊗ R(φ)` on `2·D` dimensions, control first.
pub fn controlled_reflection(phi: &StateVector) -> UnitaryMatrix {
    let d = phi.dim();
    let r = reflection(phi);
    let mut m = DMatrix::zeros(2 * d, 2 * d);
    m.view_mut((0, 0), (d, d)).fill_with_identity();
    m.view_mut((d, d), (d, d)).copy_from(&r);
    UnitaryMatrix::from_matrix_unchecked(m)
}

/// One Stage-1 block as a matrix on `system ⊗ ancilla`:
/// `W(i) = R_c(φ_i) H R_c(φ_r)`, with controls moved to the ancilla.
pub fn block_unitary(phi_i: &StateVector, phi_r: &StateVector) -> Result<UnitaryMatrix> {
    if phi_i.dim() != phi_r.dim() {
        return Err(Error::DimensionMismatch {
            expected: phi_r.dim(),
            got: phi_i.dim(),
        });
    }
    let d = phi_i.dim();
    let sys_anc = |c: &UnitaryMatrix| -> DMatrix<C64> {
        // reorder control-first (c, s) into system-first (s, c)
        DMatrix::from_fn(2 * d, 2 * d, |row, col| {
            let (s1, c1) = (row / 2, row % 2);
            let (s2, c2) = (col / 2, col % 2);
            c.matrix()[(c1 * d + s1, c2 * d + s2)]
        })
    };
    let h = DMatrix::identity(d, d).kronecker(&hadamard());
    let m = sys_anc(&controlled_reflection(phi_i)) * h * sys_anc(&controlled_reflection(phi_r));
    Ok(UnitaryMatrix::from_matrix_unchecked(m))
}

/// Learned samples plus the emulator settings.
#[derive(Clone, Debug, PartialEq)]
pub struct QeConfig {
    samples_in: Vec<StateVector>,
    samples_out: Vec<StateVector>,
    reference_index: usize,
    post_select: bool,
}

impl QeConfig {
    pub fn new(
        samples_in: Vec<StateVector>,
        samples_out: Vec<StateVector>,
        reference_index: usize,
        post_select: bool,
    ) -> Result<Self> {
        if samples_in.is_empty() {
            return Err(Error::InvalidParameter("at least one sample is required".into()));
        }
        if samples_in.len() != samples_out.len() {
            return Err(Error::InvalidParameter(format!(
                "{} input samples but {} output samples",
                samples_in.len(),
                samples_out.len()
            )));
        }
        if reference_index >= samples_in.len() {
            return Err(Error::InvalidParameter(format!(
                "reference index {reference_index} out of range for {} samples",
                samples_in.len()
            )));
        }
        let d = samples_in[0].dim();
        for s in samples_in.iter().chain(&samples_out) {
            if s.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: s.dim(),
                });
            }
        }
        Ok(Self {
            samples_in,
            samples_out,
            reference_index,
            post_select,
        })
    }

    /// Builds the output samples by applying `u`. Intended for tests and
    /// verification, where the unitary is known.
    pub fn from_unitary(
        samples_in: Vec<StateVector>,
        u: &UnitaryMatrix,
        reference_index: usize,
        post_select: bool,
    ) -> Result<Self> {
        let out = samples_in
            .iter()
            .map(|s| crate::numerics::apply(u, s))
            .collect::<Result<Vec<_>>>()?;
        Self::new(samples_in, out, reference_index, post_select)
    }

    pub fn samples_in(&self) -> &[StateVector] {
        &self.samples_in
    }

    pub fn samples_out(&self) -> &[StateVector] {
        &self.samples_out
    }

    pub fn reference_index(&self) -> usize {
        self.reference_index
    }

    pub fn post_select(&self) -> bool {
        self.post_select
    }

    pub fn with_post_select(mut self, post_select: bool) -> Self {
        self.post_select = post_select;
        self
    }

    pub fn dim(&self) -> usize {
        self.samples_in[0].dim()
    }

    pub fn reference(&self) -> &StateVector {
        &self.samples_in[self.reference_index]
    }

    /// Sample indices that get a Stage-1 block, in application order.
    pub fn block_indices(&self) -> Vec<usize> {
        (0..self.samples_in.len())
            .filter(|&i| i != self.reference_index)
            .collect()
    }

    pub fn block_count(&self) -> usize {
        self.samples_in.len() - 1
    }

    fn check_input(&self, psi: &StateVector) -> Result<()> {
        if psi.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: psi.dim(),
            });
        }
        Ok(())
    }
}

/// Joint state of the system and Stage-1 ancillas.
#[derive(Clone, Debug, PartialEq)]
pub struct Stage1State {
    register: Register,
}

impl Stage1State {
    pub fn register(&self) -> &Register {
        &self.register
    }

    pub fn ancilla_count(&self) -> usize {
        self.register.dims().len() - 1
    }

    pub fn to_state(&self) -> Result<StateVector> {
        self.register.to_state()
    }

    /// Reduced state of the system register.
    pub fn system_density(&self) -> Result<DensityMatrix> {
        Ok(DensityMatrix::from_matrix_unchecked(
            self.register.reduced_matrix(&[0])?,
        ))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Stage1Run {
    pub state: Stage1State,
    /// Joint state after each block, starting with the bare input.
    pub snapshots: Vec<Stage1State>,
}

fn apply_block(reg: &mut Register, anc: usize, phi_i: &StateVector, phi_r: &StateVector) -> Result<()> {
    reg.apply_controlled(anc, 0, &reflection(phi_r))?;
    reg.apply(anc, &hadamard())?;
    reg.apply_controlled(anc, 0, &reflection(phi_i))
}

fn apply_inverse_block(reg: &mut Register, anc: usize, phi_i: &StateVector, phi_r: &StateVector) -> Result<()> {
    reg.apply_controlled(anc, 0, &reflection(phi_i))?;
    reg.apply(anc, &hadamard())?;
    reg.apply_controlled(anc, 0, &reflection(phi_r))
}

fn extend_with_ancilla(reg: &Register) -> Result<Register> {
    let minus = minus_state();
    let joint = tensor(&reg.to_state()?, &minus)?;
    let mut dims = reg.dims().to_vec();
    dims.push(2);
    Register::from_state(&joint, &dims)
}

/// Runs Stage 1, appending one `|−⟩` ancilla per block.
pub fn run_stage1(cfg: &QeConfig, psi: &StateVector) -> Result<Stage1Run> {
    cfg.check_input(psi)?;
    let phi_r = cfg.reference();
    let mut reg = Register::product(&[psi])?;
    let mut snapshots = vec![Stage1State { register: reg.clone() }];
    for i in cfg.block_indices() {
        reg = extend_with_ancilla(&reg)?;
        let anc = reg.dims().len() - 1;
        apply_block(&mut reg, anc, &cfg.samples_in[i], phi_r)?;
        snapshots.push(Stage1State { register: reg.clone() });
    }
    Ok(Stage1Run {
        state: Stage1State { register: reg },
        snapshots,
    })
}

/// `⟨φ_r| tr_anc |χ⟩⟨χ| |φ_r⟩`: the Stage-2 success probability.
pub fn reference_overlap(state: &Stage1State, reference: &StateVector) -> Result<f64> {
    Ok(state.system_density()?.expectation(reference)?.clamp(0.0, 1.0))
}

/// `|⟨φ_r| tr_anc |χ⟩⟨χ| |φ_r⟩|²`.
pub fn p_succ_stage1(state: &Stage1State, reference: &StateVector) -> Result<f64> {
    let p = reference_overlap(state, reference)?;
    Ok(p * p)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage2Outcome {
    /// Outcome 0 observed or conditioned on.
    Success,
    /// Outcome 1 observed; the run was completed on the failure branch.
    Failure,
    /// Not post-selected: both branches kept as a mixture.
    Skipped,
}

impl Stage2Outcome {
    pub fn bit(self) -> Option<u8> {
        match self {
            Stage2Outcome::Success => Some(0),
            Stage2Outcome::Failure => Some(1),
            Stage2Outcome::Skipped => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QeRunResult {
    /// Reduced state of the system register after Stage 4.
    pub output: DensityMatrix,
    pub stage2: Stage2Outcome,
    pub p_succ_stage1: f64,
    /// Probability of Stage-2 outcome 0; equals `√p_succ_stage1`.
    pub stage2_success_probability: f64,
    pub fidelity_vs_target: Option<f64>,
}

impl QeRunResult {
    pub fn fidelity_to(&self, target: &StateVector) -> Result<f64> {
        Ok(self.output.expectation(target)?.clamp(0.0, 1.0))
    }

    pub fn with_target(mut self, target: &StateVector) -> Result<Self> {
        self.fidelity_vs_target = Some(self.fidelity_to(target)?);
        Ok(self)
    }
}

enum Stage2Mode {
    Condition,
    Mixture,
    Observed(usize),
}

fn run_stages(cfg: &QeConfig, psi: &StateVector, mode: Stage2Mode) -> Result<QeRunResult> {
    let stage1 = run_stage1(cfg, psi)?.state;
    let p = reference_overlap(&stage1, cfg.reference())?;
    let m = stage1.ancilla_count();
    let s2 = m + 1;
    let swap_reg = m + 2;

    let phi_r_out = &cfg.samples_out[cfg.reference_index];
    let joint = tensor(&tensor(&stage1.register.to_state()?, &minus_state())?, phi_r_out)?;
    let mut dims = stage1.register.dims().to_vec();
    dims.extend([2, cfg.dim()]);
    let mut reg = Register::from_state(&joint, &dims)?;

    reg.apply_controlled(s2, 0, &reflection(cfg.reference()))?;
    reg.apply(s2, &hadamard())?;
    let stage2 = match mode {
        Stage2Mode::Condition => {
            if p < POST_SELECTION_FLOOR {
                return Err(Error::PostSelectionImpossible(p));
            }
            reg.project(s2, 0)?;
            reg.renormalize()?;
            Stage2Outcome::Success
        }
        Stage2Mode::Mixture => Stage2Outcome::Skipped,
        Stage2Mode::Observed(bit) => {
            reg.project(s2, bit)?;
            reg.renormalize()?;
            if bit == 0 {
                Stage2Outcome::Success
            } else {
                Stage2Outcome::Failure
            }
        }
    };

    reg.swap(0, swap_reg)?;

    let blocks = cfg.block_indices();
    for (j, &i) in blocks.iter().enumerate().rev() {
        apply_inverse_block(&mut reg, j + 1, &cfg.samples_out[i], phi_r_out)?;
    }

    let output = DensityMatrix::from_matrix_unchecked(reg.reduced_matrix(&[0])?);
    Ok(QeRunResult {
        output,
        stage2,
        p_succ_stage1: p * p,
        stage2_success_probability: p,
        fidelity_vs_target: None,
    })
}

/// Runs all four stages. With `post_select` the result is conditioned on
/// Stage-2 success (an error if that branch has probability below
/// [`POST_SELECTION_FLOOR`]); otherwise the Stage-2 ancilla is traced out.
pub fn run_full(cfg: &QeConfig, psi: &StateVector) -> Result<QeRunResult> {
    let mode = if cfg.post_select {
        Stage2Mode::Condition
    } else {
        Stage2Mode::Mixture
    };
    run_stages(cfg, psi, mode)
}

/// Like [`run_full`], and records the fidelity with `target`.
pub fn run_full_against(cfg: &QeConfig, psi: &StateVector, target: &StateVector) -> Result<QeRunResult> {
    run_full(cfg, psi)?.with_target(target)
}

/// Samples the Stage-2 measurement. A failed measurement is not retried:
/// the run is completed on the failure branch and reported as such. With
/// `post_select` off the sample is ignored and the mixture is returned.
pub fn run_full_sampled<R: Rng + ?Sized>(cfg: &QeConfig, psi: &StateVector, rng: &mut R) -> Result<QeRunResult> {
    if !cfg.post_select {
        return run_stages(cfg, psi, Stage2Mode::Mixture);
    }
    let stage1 = run_stage1(cfg, psi)?.state;
    let p = reference_overlap(&stage1, cfg.reference())?;
    let u: f64 = rng.random();
    let bit = if u < p { 0 } else { 1 };
    run_stages(cfg, psi, Stage2Mode::Observed(bit))
}

/// Which vector a closed-form term carries on the system register.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SystemLabel {
    Reference,
    Sample(usize),
    Input,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormTerm {
    pub coefficient: C64,
    pub system_label: SystemLabel,
    /// One bit per Stage-1 ancilla, in block order.
    pub ancilla_bits: Vec<u8>,
}

/// Stage-1 state as an explicit term list, built from the recursion
/// `χ_i = ½[(I − R_r)χ_{i−1}|0⟩ + R_i(I + R_r)χ_{i−1}|1⟩]` using
/// `½(I − R_r) = P_r` and `½R_i(I + R_r) = I − P_r − 2P_i + 2P_iP_r`.
/// Terms sharing a label and ancilla string are merged.
pub fn stage1_closed_form(cfg: &QeConfig, psi: &StateVector) -> Result<Vec<ClosedFormTerm>> {
    expand_stage1(cfg, psi, true)
}

/// The same expansion without merging: every block multiplies each term
/// into the five products above, in that order. Zero products are dropped.
pub fn stage1_term_expansion(cfg: &QeConfig, psi: &StateVector) -> Result<Vec<ClosedFormTerm>> {
    expand_stage1(cfg, psi, false)
}

fn expand_stage1(cfg: &QeConfig, psi: &StateVector, merge: bool) -> Result<Vec<ClosedFormTerm>> {
    cfg.check_input(psi)?;
    let r = cfg.reference_index;
    let vector = |label: SystemLabel| -> &StateVector {
        match label {
            SystemLabel::Reference => &cfg.samples_in[r],
            SystemLabel::Sample(i) => &cfg.samples_in[i],
            SystemLabel::Input => psi,
        }
    };
    let overlap = |a: &StateVector, b: &StateVector| a.inner(b).expect("dims checked");
    let phi_r = cfg.reference();

    let mut terms = vec![ClosedFormTerm {
        coefficient: C64::new(1.0, 0.0),
        system_label: SystemLabel::Input,
        ancilla_bits: Vec::new(),
    }];
    for i in cfg.block_indices() {
        let phi_i = &cfg.samples_in[i];
        let ir = overlap(phi_i, phi_r);
        let mut next = Vec::with_capacity(terms.len() * 5);
        for t in &terms {
            let c = t.coefficient;
            let v = vector(t.system_label);
            let rv = overlap(phi_r, v);
            let iv = overlap(phi_i, v);
            let products = [
                (SystemLabel::Reference, 0u8, c * rv),
                (t.system_label, 1, c),
                (SystemLabel::Reference, 1, -c * rv),
                (SystemLabel::Sample(i), 1, -2.0 * c * iv),
                (SystemLabel::Sample(i), 1, 2.0 * c * ir * rv),
            ];
            for (system_label, bit, coefficient) in products {
                let mut ancilla_bits = t.ancilla_bits.clone();
                ancilla_bits.push(bit);
                next.push(ClosedFormTerm {
                    coefficient,
                    system_label,
                    ancilla_bits,
                });
            }
        }
        if merge {
            let mut merged: BTreeMap<(SystemLabel, Vec<u8>), C64> = BTreeMap::new();
            for t in next {
                *merged
                    .entry((t.system_label, t.ancilla_bits))
                    .or_insert(C64::new(0.0, 0.0)) += t.coefficient;
            }
            next = merged
                .into_iter()
                .map(|((system_label, ancilla_bits), coefficient)| ClosedFormTerm {
                    coefficient,
                    system_label,
                    ancilla_bits,
                })
                .collect();
        }
        next.retain(|t| t.coefficient.norm() > TERM_PRUNE_TOL);
        terms = next;
    }
    Ok(terms)
}

/// Sums a term list into the flat joint vector `system ⊗ anc_1 ⊗ … ⊗ anc_m`.
pub fn closed_form_vector(cfg: &QeConfig, psi: &StateVector, terms: &[ClosedFormTerm]) -> Result<Vec<C64>> {
    let m = cfg.block_count();
    let d = cfg.dim();
    let mut out = vec![C64::new(0.0, 0.0); d << m];
    for t in terms {
        if t.ancilla_bits.len() != m {
            return Err(Error::InvalidParameter(format!(
                "term has {} ancilla bits, expected {m}",
                t.ancilla_bits.len()
            )));
        }
        let v = match t.system_label {
            SystemLabel::Reference => cfg.reference(),
            SystemLabel::Sample(i) => cfg
                .samples_in
                .get(i)
                .ok_or_else(|| Error::InvalidParameter(format!("no sample {i}")))?,
            SystemLabel::Input => psi,
        };
        let anc = t.ancilla_bits.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
        for (s, a) in v.amplitudes().iter().enumerate() {
            out[(s << m) | anc] += t.coefficient * a;
        }
    }
    Ok(out)
}

/// Fidelity of two Stage-1 joint states given as flat vectors.
pub fn joint_fidelity(a: &[C64], b: &[C64]) -> f64 {
    let inner: C64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    let na: f64 = a.iter().map(|x| x.norm_sqr()).sum();
    let nb: f64 = b.iter().map(|x| x.norm_sqr()).sum();
    inner.norm_sqr() / (na * nb)
}

/// Mixed-state fidelity of the emulator output with the ideal response.
pub fn output_fidelity(result: &QeRunResult, target: &StateVector) -> Result<f64> {
    fidelity_mixed(&result.output, &target.density())
}
