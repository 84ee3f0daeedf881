//! Complete, deterministic decision procedure for path constraints over
//! the program's input bits: bit-blast to CNF, decide with the built-in
//! CDCL core. Models prefer zeros, so the canonical model of the empty
//! constraint is the all-zero input.

mod blast;
mod sat;

use std::cell::{Cell, RefCell};
use std::collections::HashMap;

use crate::concrete::InputVector;
use crate::expr::Constraint;
use blast::Blaster;

/// A total assignment of concrete values to input sites 0..n-1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Model {
    /// Width of each site, in site order.
    pub site_widths: Vec<u8>,
    /// Value of each site (masked to its width).
    pub values: Vec<u64>,
}

impl Model {
    pub fn total_bits(&self) -> u32 {
        self.site_widths.iter().map(|&w| w as u32).sum()
    }

    /// Bit `i` of the bit-string view: sites concatenated in site order,
    /// LSB first within each site.
    pub fn bit(&self, mut i: u32) -> bool {
        for (k, &w) in self.site_widths.iter().enumerate() {
            if i < w as u32 {
                return self.values[k] >> i & 1 == 1;
            }
            i -= w as u32;
        }
        panic!("bit index out of range");
    }

    /// Rebuild a model from a bit-string view with the same layout.
    pub fn from_bits(site_widths: &[u8], bits: &[bool]) -> Model {
        let mut values = Vec::with_capacity(site_widths.len());
        let mut pos = 0usize;
        for &w in site_widths {
            let mut v = 0u64;
            for k in 0..w as usize {
                if bits[pos + k] {
                    v |= 1 << k;
                }
            }
            pos += w as usize;
            values.push(v);
        }
        Model { site_widths: site_widths.to_vec(), values }
    }

    /// Pack into the interpreter's byte stream: each site little-endian,
    /// in site order.
    pub fn to_input_vector(&self) -> InputVector {
        let mut bytes = Vec::new();
        for (k, &w) in self.site_widths.iter().enumerate() {
            let v = self.values[k];
            for byte in 0..(w / 8) as usize {
                bytes.push((v >> (8 * byte)) as u8);
            }
        }
        InputVector::new(bytes)
    }

    /// Satisfaction check against a constraint.
    pub fn satisfies(&self, c: &Constraint) -> bool {
        c.eval(&|ord| self.values.get(ord as usize).copied().unwrap_or(0))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CheckResult {
    Sat(Model),
    Unsat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum SolverError {
    #[error("constraint spans {0} input bits, over the solver bit budget")]
    BitBudgetExceeded(u32),
}

pub const DEFAULT_BIT_BUDGET: u32 = 4096;

/// Stateless per query apart from a result cache keyed by the canonical
/// constraint text, plus a call counter (the cost metric the sampler's
/// one-call-per-batch contract is asserted against).
pub struct SolverCtx {
    bit_budget: u32,
    cache: RefCell<HashMap<String, CheckResult>>,
    calls: Cell<u64>,
}

impl SolverCtx {
    pub fn new() -> Self {
        Self::with_bit_budget(DEFAULT_BIT_BUDGET)
    }

    pub fn with_bit_budget(bit_budget: u32) -> Self {
        SolverCtx { bit_budget, cache: RefCell::new(HashMap::new()), calls: Cell::new(0) }
    }

    /// Number of check/check_flip invocations so far (cache hits count:
    /// the contract is about query structure, not wall time).
    pub fn calls(&self) -> u64 {
        self.calls.get()
    }

    fn budget_check(&self, site_widths: &[u8]) -> Result<(), SolverError> {
        let bits: u32 = site_widths.iter().map(|&w| w as u32).sum();
        if bits > self.bit_budget {
            Err(SolverError::BitBudgetExceeded(bits))
        } else {
            Ok(())
        }
    }

    /// Decide `c` over the given input sites; Sat models are total over
    /// all sites (unmentioned sites get the preferred value 0).
    pub fn check(&self, c: &Constraint, site_widths: &[u8]) -> Result<CheckResult, SolverError> {
        self.budget_check(site_widths)?;
        self.calls.set(self.calls.get() + 1);
        let key = c.to_text(site_widths);
        if let Some(hit) = self.cache.borrow().get(&key) {
            return Ok(hit.clone());
        }
        let result = solve_instance(c, site_widths, None, None);
        self.cache.borrow_mut().insert(key, result.clone());
        Ok(result)
    }

    /// Find a model of `c` that differs from `m` at `bit_index` of the
    /// bit-string view; Unsat means every model agrees with `m` there.
    pub fn check_flip(
        &self,
        c: &Constraint,
        site_widths: &[u8],
        m: &Model,
        bit_index: u32,
    ) -> Result<CheckResult, SolverError> {
        self.budget_check(site_widths)?;
        assert!(bit_index < m.total_bits(), "flip bit out of range");
        self.calls.set(self.calls.get() + 1);
        let cur = m.bit(bit_index);
        let key = format!("{}(flip {bit_index} {})", c.to_text(site_widths), cur as u8);
        if let Some(hit) = self.cache.borrow().get(&key) {
            return Ok(hit.clone());
        }
        let result = solve_instance(c, site_widths, Some((bit_index, !cur)), Some(m));
        self.cache.borrow_mut().insert(key, result.clone());
        Ok(result)
    }
}

impl Default for SolverCtx {
    fn default() -> Self {
        Self::new()
    }
}

fn solve_instance(
    c: &Constraint,
    site_widths: &[u8],
    force_bit: Option<(u32, bool)>,
    near: Option<&Model>,
) -> CheckResult {
    let mut blaster = Blaster::new(c, site_widths);
    if let Some((bit, value)) = force_bit {
        let lit = blaster.input_bit_lit(bit);
        blaster.sat.add_clause(&[if value { lit } else { -lit }]);
    }
    // Bias the decision heuristic toward `near`: flip queries then return
    // models that differ from the base model as little as the constraint
    // allows, which is what makes batch mutation path-preserving.
    if let Some(m) = near {
        for bit in 0..m.total_bits() {
            let lit = blaster.input_bit_lit(bit);
            blaster.sat.set_polarity(sat::lit_var(lit), m.bit(bit) == (lit > 0));
        }
    }
    match blaster.sat.solve() {
        Some(model) => {
            let values = blaster.site_values(&model);
            let out = Model { site_widths: site_widths.to_vec(), values };
            debug_assert!(out.satisfies(c));
            CheckResult::Sat(out)
        }
        None => CheckResult::Unsat,
    }
}

/// Exhaustive enumeration oracle for tests: all satisfying site-value
/// tuples, in ascending bit-string order. Only valid below 2^20 inputs.
pub fn enumerate_models(c: &Constraint, site_widths: &[u8]) -> Vec<Vec<u64>> {
    let bits: u32 = site_widths.iter().map(|&w| w as u32).sum();
    assert!(bits <= 20, "enumeration oracle limited to 20 bits");
    let mut out = Vec::new();
    for raw in 0u64..1u64 << bits {
        let mut values = Vec::with_capacity(site_widths.len());
        let mut pos = 0u32;
        for &w in site_widths {
            values.push(raw >> pos & ((1u64 << w) - 1));
            pos += w as u32;
        }
        if c.eval(&|ord| values.get(ord as usize).copied().unwrap_or(0)) {
            out.push(values);
        }
    }
    out
}
