//! Approximate path-preserving fuzzing: amortise one solver call over a
//! whole batch of inputs.
//!
//! The first batch is the solver's canonical model σ of the node's path
//! condition. Every later batch costs exactly one bit-flip solver query:
//! flipping bit b_i of σ yields σ′, and each previously yielded string
//! σ″ contributes the mutant σ ⊕ ((σ ⊕ σ′) ∨ (σ ⊕ σ″)), which agrees
//! with σ′ on bit i, keeps σ″'s other deviations from σ, and usually
//! still satisfies the constraint. Solver-produced strings always
//! satisfy it; only mutants may stray (the preservation-rate metric
//! measures how often they do not).

use std::collections::HashSet;

use crate::concrete::{self, InputVector, Trace};
use crate::expr::Constraint;
use crate::ir::{Address, IrProgram};
use crate::solver::{CheckResult, Model, SolverCtx, SolverError};

/// A fixed-length bit string: the sampler's view of a model (input
/// sites concatenated in site order, LSB first within each site).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitString {
    words: Vec<u64>,
    len: u32,
}

impl BitString {
    pub fn zero(len: u32) -> Self {
        BitString { words: vec![0; len.div_ceil(64) as usize], len }
    }

    pub fn from_model(m: &Model) -> Self {
        let len = m.total_bits();
        let mut out = Self::zero(len);
        for i in 0..len {
            if m.bit(i) {
                out.words[(i / 64) as usize] |= 1 << (i % 64);
            }
        }
        out
    }

    pub fn to_model(&self, site_widths: &[u8]) -> Model {
        let bits: Vec<bool> = (0..self.len).map(|i| self.bit(i)).collect();
        Model::from_bits(site_widths, &bits)
    }

    pub fn len(&self) -> u32 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn bit(&self, i: u32) -> bool {
        self.words[(i / 64) as usize] >> (i % 64) & 1 == 1
    }

    fn zip(&self, other: &BitString, f: impl Fn(u64, u64) -> u64) -> BitString {
        BitString {
            words: self.words.iter().zip(&other.words).map(|(&a, &b)| f(a, b)).collect(),
            len: self.len,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("bit strings have different lengths: {0} vs {1}")]
pub struct LengthMismatch(pub u32, pub u32);

/// The batch mutation operator: σ ⊕ ((σ ⊕ σ′) ∨ (σ ⊕ σ″)).
pub fn mutate(
    sigma: &BitString,
    sigma1: &BitString,
    sigma2: &BitString,
) -> Result<BitString, LengthMismatch> {
    if sigma.len != sigma1.len {
        return Err(LengthMismatch(sigma.len, sigma1.len));
    }
    if sigma.len != sigma2.len {
        return Err(LengthMismatch(sigma.len, sigma2.len));
    }
    let d1 = sigma.zip(sigma1, |a, b| a ^ b);
    let d2 = sigma.zip(sigma2, |a, b| a ^ b);
    let union = d1.zip(&d2, |a, b| a | b);
    Ok(sigma.zip(&union, |a, b| a ^ b))
}

/// How a yielded input was produced: directly by the solver (exactly
/// satisfies the constraint) or by mutation (approximately).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputKind {
    Solver,
    Mutant,
}

/// The per-node sampling generator. Memoizes everything it has yielded,
/// skips bits the solver proves fixed, and declares exhaustion after a
/// whole pass over the bits produces nothing new.
#[derive(Debug, Clone)]
pub struct SamplerState {
    constraint: Constraint,
    site_widths: Vec<u8>,
    /// Base model σ (None until the first batch).
    sigma_model: Option<Model>,
    sigma: Option<BitString>,
    /// Every bit string ever yielded.
    produced: HashSet<BitString>,
    /// Σ: yielded flip batches, in order (σ itself excluded).
    prior: Vec<BitString>,
    /// Outer-loop cursor over σ's bits.
    next_bit: u32,
    /// Whether the current pass has yielded anything new.
    pass_yielded: bool,
    started: bool,
    exhausted: bool,
    /// Completed next_batch calls that issued a solver query.
    pub batches: u64,
}

impl SamplerState {
    pub fn new(constraint: Constraint, site_widths: Vec<u8>) -> Self {
        SamplerState {
            constraint,
            site_widths,
            sigma_model: None,
            sigma: None,
            produced: HashSet::new(),
            prior: Vec::new(),
            next_bit: 0,
            pass_yielded: false,
            started: false,
            exhausted: false,
            batches: 0,
        }
    }

    pub fn exhausted(&self) -> bool {
        self.exhausted
    }

    pub fn constraint(&self) -> &Constraint {
        &self.constraint
    }

    pub fn site_widths(&self) -> &[u8] {
        &self.site_widths
    }

    fn to_input(&self, bits: &BitString) -> InputVector {
        bits.to_model(&self.site_widths).to_input_vector()
    }

    /// One iteration of the generator: the σ batch on the first call,
    /// afterwards exactly one bit-flip query plus mutation.
    pub fn next_batch(
        &mut self,
        solver: &SolverCtx,
    ) -> Result<Vec<(InputVector, InputKind)>, SolverError> {
        if self.exhausted {
            return Ok(Vec::new());
        }
        if !self.started {
            self.started = true;
            self.batches += 1;
            return match solver.check(&self.constraint, &self.site_widths)? {
                CheckResult::Unsat => {
                    self.exhausted = true;
                    Ok(Vec::new())
                }
                CheckResult::Sat(m) => {
                    let bits = BitString::from_model(&m);
                    self.produced.insert(bits.clone());
                    let input = m.to_input_vector();
                    self.sigma_model = Some(m);
                    self.sigma = Some(bits);
                    if self.total_bits() == 0 {
                        // Nothing to flip, ever.
                        self.exhausted = true;
                    }
                    Ok(vec![(input, InputKind::Solver)])
                }
            };
        }

        let bit = self.next_bit;
        let sigma_model = self.sigma_model.clone().expect("started implies sigma");
        let sigma = self.sigma.clone().expect("started implies sigma");
        self.batches += 1;
        let mut yielded: Vec<(InputVector, InputKind)> = Vec::new();
        match solver.check_flip(&self.constraint, &self.site_widths, &sigma_model, bit)? {
            CheckResult::Unsat => {
                // The bit is fixed across all models: skip it.
            }
            CheckResult::Sat(m1) => {
                let sigma1 = BitString::from_model(&m1);
                let mut batch: Vec<(BitString, InputKind)> = vec![(sigma1.clone(), InputKind::Solver)];
                for sigma2 in &self.prior {
                    let m = mutate(&sigma, &sigma1, sigma2).expect("equal lengths by construction");
                    batch.push((m, InputKind::Mutant));
                }
                for (bits, kind) in batch {
                    if self.produced.insert(bits.clone()) {
                        yielded.push((self.to_input(&bits), kind));
                        self.prior.push(bits);
                    }
                }
            }
        }
        if !yielded.is_empty() {
            self.pass_yielded = true;
        }
        self.next_bit += 1;
        if self.next_bit >= self.total_bits() {
            // End of a full pass over the bits.
            if self.pass_yielded {
                self.next_bit = 0;
                self.pass_yielded = false;
            } else {
                self.exhausted = true;
            }
        }
        Ok(yielded)
    }

    fn total_bits(&self) -> u32 {
        self.site_widths.iter().map(|&w| w as u32).sum()
    }
}

/// The minimum-sample loop: keep pulling batches until at least
/// `n_samples` inputs have been collected or the generator is exhausted.
/// Batches are never truncated, so the result may overshoot.
pub fn app_fuzz(
    st: &mut SamplerState,
    solver: &SolverCtx,
    n_samples: usize,
) -> Result<Vec<(InputVector, InputKind)>, SolverError> {
    debug_assert!(n_samples >= 1);
    let mut results = Vec::new();
    while results.len() < n_samples && !st.exhausted() {
        results.extend(st.next_batch(solver)?);
    }
    Ok(results)
}

/// Fraction of inputs whose concrete trace starts with `prefix`.
/// The empty input list is vacuously preserving.
pub struct PreservationRate {
    pub rate: f64,
    pub vacuous: bool,
}

pub fn preservation_rate(
    p: &IrProgram,
    prefix: &[Address],
    inputs: &[InputVector],
    depth_cap: usize,
    step_cap: u64,
) -> PreservationRate {
    if inputs.is_empty() {
        return PreservationRate { rate: 1.0, vacuous: true };
    }
    let traces = concrete::execute_batch(p, inputs, depth_cap, step_cap);
    let hits = traces.iter().filter(|t| trace_starts_with(t, prefix)).count();
    PreservationRate { rate: hits as f64 / inputs.len() as f64, vacuous: false }
}

pub fn trace_starts_with(t: &Trace, prefix: &[Address]) -> bool {
    t.addrs.len() >= prefix.len() && t.addrs[..prefix.len()] == *prefix
}
