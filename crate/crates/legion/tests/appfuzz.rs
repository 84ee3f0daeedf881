//! Constrained sampler: batch generation, mutation, exhaustion, and
//! path preservation.

use std::collections::HashSet;

use legion::appfuzz::{
    app_fuzz, mutate, preservation_rate, trace_starts_with, BitString, InputKind, SamplerState,
};
use legion::concrete::{execute, InputVector};
use legion::expr::{bin, cst, site, BvBinOp, Constraint};
use legion::ir::Address;
use legion::lang::{lower, parse, SourceProgram};
use legion::solver::{Model, SolverCtx};

use proptest::prelude::*;

fn constraint_of(e: legion::expr::ExprRef) -> Constraint {
    let mut c = Constraint::default();
    c.push(e);
    c
}

fn x8() -> legion::expr::ExprRef {
    site(0, 8)
}

fn bits(vals: &[u8]) -> BitString {
    let widths = vec![8u8; vals.len()];
    let b: Vec<bool> = vals
        .iter()
        .flat_map(|v| (0..8).map(move |i| v >> i & 1 == 1))
        .collect();
    BitString::from_model(&Model::from_bits(&widths, &b))
}

#[test]
fn mutate_worked_example() {
    // 0000 ⊕ ((0000⊕0011) ∨ (0000⊕0101)) = 0111, bit by bit.
    let s = bits(&[0b0000]);
    let s1 = bits(&[0b0011]);
    let s2 = bits(&[0b0101]);
    assert_eq!(mutate(&s, &s1, &s2).unwrap(), bits(&[0b0111]));
}

#[test]
fn mutate_length_mismatch_is_an_error() {
    assert!(mutate(&bits(&[1]), &bits(&[1, 2]), &bits(&[1])).is_err());
}

proptest! {
    #[test]
    fn mutate_identities(a in any::<[u8; 4]>(), b in any::<[u8; 4]>(), c in any::<[u8; 4]>()) {
        let s = bits(&a);
        let s1 = bits(&b);
        let s2 = bits(&c);
        prop_assert_eq!(mutate(&s, &s1, &s).unwrap(), s1.clone());
        prop_assert_eq!(mutate(&s, &s1, &s1).unwrap(), s1.clone());
        let m = mutate(&s, &s1, &s2).unwrap();
        for i in 0..32u32 {
            let expect = s.bit(i) ^ ((s.bit(i) ^ s1.bit(i)) | (s.bit(i) ^ s2.bit(i)));
            prop_assert_eq!(m.bit(i), expect);
        }
    }
}

#[test]
fn unsat_constraint_exhausts_immediately() {
    let c = constraint_of(bin(BvBinOp::Eq, x8(), cst(8, 1)));
    let c = {
        let mut c = c;
        c.push(bin(BvBinOp::Eq, x8(), cst(8, 2)));
        c
    };
    let solver = SolverCtx::new();
    let mut st = SamplerState::new(c, vec![8]);
    let batch = st.next_batch(&solver).unwrap();
    assert!(batch.is_empty());
    assert!(st.exhausted());
}

/// x == 7 has a unique model: one σ batch, then every flip is Unsat;
/// the sampler is exhausted after flipping each of the 8 bits once.
#[test]
fn unique_model_exhausts_after_one_flip_pass() {
    let c = constraint_of(bin(BvBinOp::Eq, x8(), cst(8, 7)));
    let solver = SolverCtx::new();
    let mut st = SamplerState::new(c, vec![8]);
    let first = st.next_batch(&solver).unwrap();
    assert_eq!(first.len(), 1);
    assert_eq!(first[0].0.bytes, vec![7]);
    assert_eq!(first[0].1, InputKind::Solver);
    let mut flip_calls = 0;
    while !st.exhausted() {
        let b = st.next_batch(&solver).unwrap();
        assert!(b.is_empty(), "no second model exists");
        flip_calls += 1;
        assert!(flip_calls <= 8, "must exhaust within one pass over 8 bits");
    }
    assert_eq!(flip_calls, 8);
}

#[test]
fn batch_doubling_on_four_unconstrained_bits() {
    // x < 16 frees exactly the low 4 bits of an 8-bit site.
    let c = constraint_of(bin(BvBinOp::Ult, x8(), cst(8, 16)));
    let solver = SolverCtx::new();
    let mut st = SamplerState::new(c, vec![8]);
    let mut sizes = Vec::new();
    for _ in 0..5 {
        sizes.push(st.next_batch(&solver).unwrap().len());
    }
    assert_eq!(sizes, vec![1, 1, 2, 4, 8]);
}

#[test]
fn batches_never_repeat_an_input() {
    let c = Constraint::default();
    let solver = SolverCtx::new();
    let mut st = SamplerState::new(c, vec![8]);
    let mut seen: HashSet<Vec<u8>> = HashSet::new();
    for _ in 0..9 {
        for (iv, _) in st.next_batch(&solver).unwrap() {
            assert!(seen.insert(iv.bytes.clone()), "duplicate input {:?}", iv.bytes);
        }
    }
    assert_eq!(seen.len(), 256, "8 unconstrained bits yield all 256 inputs");
}

#[test]
fn all_yielded_inputs_satisfy_or_approximate_the_constraint() {
    // x > 250: solver-kind inputs must satisfy it exactly.
    let c = constraint_of(bin(BvBinOp::Ult, cst(8, 250), x8()));
    let solver = SolverCtx::new();
    let mut st = SamplerState::new(c.clone(), vec![8]);
    let mut solver_kind = 0;
    for _ in 0..12 {
        for (iv, kind) in st.next_batch(&solver).unwrap() {
            if kind == InputKind::Solver {
                solver_kind += 1;
                assert!(iv.bytes[0] > 250, "solver model {} violates x > 250", iv.bytes[0]);
            }
        }
    }
    assert!(solver_kind >= 2);
}

#[test]
fn app_fuzz_n_samples_one_yields_first_model_only() {
    let c = Constraint::default();
    let solver = SolverCtx::new();
    let mut st = SamplerState::new(c, vec![8]);
    let out = app_fuzz(&mut st, &solver, 1).unwrap();
    assert_eq!(out.len(), 1);
    assert_eq!(out[0].0.bytes, vec![0], "zero-preferring first model");
}

#[test]
fn app_fuzz_n_samples_three_yields_distinct_inputs() {
    let c = Constraint::default();
    let solver = SolverCtx::new();
    let mut st = SamplerState::new(c, vec![8]);
    let out = app_fuzz(&mut st, &solver, 3).unwrap();
    assert!(out.len() >= 3);
    let uniq: HashSet<_> = out.iter().map(|(iv, _)| iv.bytes.clone()).collect();
    assert_eq!(uniq.len(), out.len());
}

#[test]
fn app_fuzz_on_exhausted_state_is_empty() {
    let c = constraint_of(bin(BvBinOp::Eq, x8(), cst(8, 7)));
    let solver = SolverCtx::new();
    let mut st = SamplerState::new(c, vec![8]);
    while !st.exhausted() {
        st.next_batch(&solver).unwrap();
    }
    assert!(app_fuzz(&mut st, &solver, 1).unwrap().is_empty());
}

#[test]
fn preservation_rate_vacuous_and_exact() {
    let p = lower(
        &parse(&SourceProgram::from_text(
            "fn main() { x = input(8); if (x > 250) { abort; } }",
        ))
        .unwrap(),
    )
    .unwrap();
    let vac = preservation_rate(&p, &[], &[], 100, 1000);
    assert!(vac.vacuous);
    assert_eq!(vac.rate, 1.0);

    let rare = execute(&p, &InputVector::new(vec![255]), 100, 1000);
    let prefix: Vec<Address> = rare.addrs.clone();
    // Pure solver models for x > 250 all preserve the rare prefix.
    let c = constraint_of(bin(BvBinOp::Ult, cst(8, 250), x8()));
    let solver = SolverCtx::new();
    let mut st = SamplerState::new(c, vec![8]);
    let mut solver_inputs = Vec::new();
    for _ in 0..10 {
        for (iv, kind) in st.next_batch(&solver).unwrap() {
            if kind == InputKind::Solver {
                solver_inputs.push(iv);
            }
        }
    }
    let r = preservation_rate(&p, &prefix, &solver_inputs, 100, 1000);
    assert!(!r.vacuous);
    assert_eq!(r.rate, 1.0, "exact solver models always preserve the path");
}

#[test]
fn trace_starts_with_is_prefix_semantics() {
    let p = lower(
        &parse(&SourceProgram::from_text(
            "fn main() { x = input(8); if (x > 250) { abort; } }",
        ))
        .unwrap(),
    )
    .unwrap();
    let t = execute(&p, &InputVector::new(vec![255]), 100, 1000);
    assert!(trace_starts_with(&t, &[]));
    assert!(trace_starts_with(&t, &t.addrs));
    let mut longer = t.addrs.clone();
    longer.push(t.addrs[0]);
    assert!(!trace_starts_with(&t, &longer));
}
