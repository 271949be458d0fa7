//! Multi-register statevector engine.
//!
//! A [`Register`] holds one pure state over an ordered list of subsystems of
//! arbitrary dimension. Subsystem 0 is the most significant digit of the
//! flat amplitude index.

use nalgebra::{DMatrix, DVector};

use super::{check_dim_cap, StateVector, C64};
use crate::error::{Error, Result};

/// Index bookkeeping for splitting a flat index into kept and traced parts.
#[derive(Clone, Debug)]
pub struct SubsystemLayout {
    total: usize,
    kept_dim: usize,
    rest_dim: usize,
    // table[a * rest_dim + r] = flat index
    table: Vec<usize>,
}

impl SubsystemLayout {
    pub fn new(dims: &[usize], keep: &[usize]) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::InvalidSubsystems(format!("bad subsystem dims {dims:?}")));
        }
        let mut seen = vec![false; dims.len()];
        for &k in keep {
            if k >= dims.len() || seen[k] {
                return Err(Error::InvalidSubsystems(format!(
                    "keep list {keep:?} invalid for {} subsystems",
                    dims.len()
                )));
            }
            seen[k] = true;
        }
        let total: usize = dims.iter().product();
        let strides = strides(dims);
        let rest: Vec<usize> = (0..dims.len()).filter(|i| !seen[*i]).collect();
        let kept_dim: usize = keep.iter().map(|&k| dims[k]).product();
        let rest_dim: usize = rest.iter().map(|&k| dims[k]).product();

        let mut table = vec![0usize; total];
        for a in 0..kept_dim {
            let base_a = compose(a, keep, dims, &strides);
            for r in 0..rest_dim {
                table[a * rest_dim + r] = base_a + compose(r, &rest, dims, &strides);
            }
        }
        Ok(Self {
            total,
            kept_dim,
            rest_dim,
            table,
        })
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn kept_dim(&self) -> usize {
        self.kept_dim
    }

    pub fn rest_dim(&self) -> usize {
        self.rest_dim
    }

    pub fn full_index(&self, kept: usize, rest: usize) -> usize {
        self.table[kept * self.rest_dim + rest]
    }

    /// `M M†` where `M[a, r]` is the amplitude at `(kept = a, rest = r)`.
    pub fn reduce_amplitudes(&self, amps: &[C64]) -> DMatrix<C64> {
        let m = DMatrix::from_fn(self.kept_dim, self.rest_dim, |a, r| amps[self.full_index(a, r)]);
        &m * m.adjoint()
    }
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * dims[i + 1];
    }
    s
}

// Flat offset of the mixed-radix number `value` whose digits live on `subs`.
fn compose(mut value: usize, subs: &[usize], dims: &[usize], strides: &[usize]) -> usize {
    let mut off = 0;
    for &s in subs.iter().rev() {
        off += (value % dims[s]) * strides[s];
        value /= dims[s];
    }
    off
}

#[derive(Clone, Debug, PartialEq)]
pub struct Register {
    dims: Vec<usize>,
    strides: Vec<usize>,
    amps: Vec<C64>,
}

impl Register {
    /// Product state `s_0 ⊗ s_1 ⊗ …`.
    pub fn product(states: &[&StateVector]) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::InvalidSubsystems("register needs at least one subsystem".into()));
        }
        let dims: Vec<usize> = states.iter().map(|s| s.dim()).collect();
        let total = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .unwrap_or(usize::MAX);
        check_dim_cap(total)?;
        let mut amps = vec![C64::new(1.0, 0.0)];
        for s in states {
            let mut next = Vec::with_capacity(amps.len() * s.dim());
            for a in &amps {
                next.extend(s.amplitudes().iter().map(|b| a * b));
            }
            amps = next;
        }
        Ok(Self {
            strides: strides(&dims),
            dims,
            amps,
        })
    }

    /// Reinterprets a flat state as a register with the given subsystem dims.
    pub fn from_state(state: &StateVector, dims: &[usize]) -> Result<Self> {
        let total: usize = dims.iter().product();
        if total != state.dim() {
            return Err(Error::NonFactorizable {
                dim: state.dim(),
                dims: dims.to_vec(),
            });
        }
        check_dim_cap(total)?;
        Ok(Self {
            dims: dims.to_vec(),
            strides: strides(dims),
            amps: state.amplitudes().to_vec(),
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    fn check_target(&self, target: usize, op_dim: usize) -> Result<()> {
        let d = *self
            .dims
            .get(target)
            .ok_or_else(|| Error::InvalidSubsystems(format!("no subsystem {target}")))?;
        if d != op_dim {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: op_dim,
            });
        }
        Ok(())
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        match self.dims.get(q) {
            Some(2) => Ok(()),
            _ => Err(Error::InvalidSubsystems(format!("subsystem {q} is not a qubit"))),
        }
    }

    // Flat indices whose digit on `target` is zero.
    fn bases(&self, target: usize) -> impl Iterator<Item = usize> + '_ {
        let d = self.dims[target];
        let s = self.strides[target];
        let block = d * s;
        let outer = self.amps.len() / block;
        (0..outer).flat_map(move |o| (0..s).map(move |i| o * block + i))
    }

    fn apply_filtered(&mut self, target: usize, op: &DMatrix<C64>, control: Option<usize>) {
        let d = self.dims[target];
        let s = self.strides[target];
        let bases: Vec<usize> = match control {
            None => self.bases(target).collect(),
            Some(c) => {
                let cs = self.strides[c];
                self.bases(target).filter(|b| (b / cs) % 2 == 1).collect()
            }
        };
        let mut buf = DVector::<C64>::zeros(d);
        for base in bases {
            for k in 0..d {
                buf[k] = self.amps[base + k * s];
            }
            let out = op * &buf;
            for k in 0..d {
                self.amps[base + k * s] = out[k];
            }
        }
    }

    /// Applies `op` to subsystem `target`.
    pub fn apply(&mut self, target: usize, op: &DMatrix<C64>) -> Result<()> {
        self.check_target(target, op.nrows())?;
        self.apply_filtered(target, op, None);
        Ok(())
    }

    /// Applies `op` to `target` on the branch where qubit `control` is `|1⟩`.
    pub fn apply_controlled(&mut self, control: usize, target: usize, op: &DMatrix<C64>) -> Result<()> {
        self.check_qubit(control)?;
        self.check_target(target, op.nrows())?;
        if control == target {
            return Err(Error::InvalidSubsystems("control equals target".into()));
        }
        self.apply_filtered(target, op, Some(control));
        Ok(())
    }

    /// Exchanges two subsystems of equal dimension.
    pub fn swap(&mut self, a: usize, b: usize) -> Result<()> {
        if a >= self.dims.len() || b >= self.dims.len() || self.dims[a] != self.dims[b] {
            return Err(Error::InvalidSubsystems(format!("cannot swap {a} and {b}")));
        }
        if a == b {
            return Ok(());
        }
        let d = self.dims[a];
        let (sa, sb) = (self.strides[a], self.strides[b]);
        for idx in 0..self.amps.len() {
            let da = (idx / sa) % d;
            let db = (idx / sb) % d;
            if da < db {
                let j = idx - da * sa - db * sb + db * sa + da * sb;
                self.amps.swap(idx, j);
            }
        }
        Ok(())
    }

    /// Probability of finding qubit `q` in `outcome`.
    pub fn outcome_probability(&self, q: usize, outcome: usize) -> Result<f64> {
        self.check_qubit(q)?;
        let s = self.strides[q];
        Ok(self
            .amps
            .iter()
            .enumerate()
            .filter(|(i, _)| (i / s) % 2 == outcome)
            .map(|(_, a)| a.norm_sqr())
            .sum())
    }

    /// Projects qubit `q` onto `outcome` without renormalizing; returns the
    /// branch probability.
    pub fn project(&mut self, q: usize, outcome: usize) -> Result<f64> {
        let p = self.outcome_probability(q, outcome)?;
        let s = self.strides[q];
        for (i, a) in self.amps.iter_mut().enumerate() {
            if (i / s) % 2 != outcome {
                *a = C64::new(0.0, 0.0);
            }
        }
        Ok(p)
    }

    pub fn renormalize(&mut self) -> Result<()> {
        let n = self.norm_sqr().sqrt();
        if n.is_nan() || n <= 1e-300 {
            return Err(Error::ZeroVector);
        }
        for a in &mut self.amps {
            *a /= n;
        }
        Ok(())
    }

    /// Unnormalized reduced operator `tr_rest |ψ⟩⟨ψ|` on the kept subsystems.
    pub fn reduced_matrix(&self, keep: &[usize]) -> Result<DMatrix<C64>> {
        let layout = SubsystemLayout::new(&self.dims, keep)?;
        Ok(layout.reduce_amplitudes(&self.amps))
    }

    pub fn to_state(&self) -> Result<StateVector> {
        StateVector::new(self.amps.clone())
    }
}
