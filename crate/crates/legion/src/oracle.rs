//! Brute-force ground truth for small programs: enumerate every input
//! vector, execute each, and collect the distinct traces. Independent
//! of the solver and the search engine by construction, so it can
//! arbitrate their results.

use std::collections::{HashMap, HashSet};

use crate::concrete::{self, InputVector, Trace};
use crate::ir::{Address, IrProgram};

pub const MAX_ORACLE_BITS: u32 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("program reads {0} input bits; the exhaustive oracle caps out at {MAX_ORACLE_BITS}")]
pub struct TooLarge(pub u32);

#[derive(Debug, Clone)]
pub struct OraclePaths {
    /// Distinct address paths, keyed by the full trace address list.
    pub paths: HashSet<Vec<Address>>,
    /// How many input vectors follow each path.
    pub multiplicity: HashMap<Vec<Address>, u64>,
    /// One representative trace per path.
    pub representative: HashMap<Vec<Address>, Trace>,
}

/// Enumerate all 2^bits inputs of `p` and return the distinct traces.
pub fn oracle_paths(
    p: &IrProgram,
    depth_cap: usize,
    step_cap: u64,
) -> Result<OraclePaths, TooLarge> {
    let bits: u32 = p.total_input_bits();
    if bits > MAX_ORACLE_BITS {
        return Err(TooLarge(bits));
    }
    let n_bytes = p.input_widths.iter().map(|&w| w as usize / 8).sum::<usize>();
    let mut out = OraclePaths {
        paths: HashSet::new(),
        multiplicity: HashMap::new(),
        representative: HashMap::new(),
    };
    for v in 0u64..(1u64 << bits) {
        // Lay the enumeration counter out as the flat little-endian
        // input stream the interpreter consumes.
        let mut bytes = vec![0u8; n_bytes];
        for (i, b) in bytes.iter_mut().enumerate() {
            *b = (v >> (8 * i)) as u8;
        }
        let trace = concrete::execute(p, &InputVector { bytes }, depth_cap, step_cap);
        *out.multiplicity.entry(trace.addrs.clone()).or_insert(0) += 1;
        if out.paths.insert(trace.addrs.clone()) {
            out.representative.insert(trace.addrs.clone(), trace);
        }
    }
    Ok(out)
}
