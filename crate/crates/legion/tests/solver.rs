//! Solver correctness against the exhaustive enumeration oracle.

use legion::expr::{self, BvBinOp, BvUnOp, Constraint, ExprRef};
use legion::solver::{enumerate_models, CheckResult, Model, SolverCtx};
use proptest::prelude::*;

fn x8() -> ExprRef {
    expr::site(0, 8)
}

fn c8(v: u64) -> ExprRef {
    expr::cst(8, v)
}

fn sat_model(r: CheckResult) -> Model {
    match r {
        CheckResult::Sat(m) => m,
        CheckResult::Unsat => panic!("expected Sat"),
    }
}

#[test]
fn empty_constraint_yields_zero_model() {
    let ctx = SolverCtx::new();
    let c = Constraint::default();
    let m = sat_model(ctx.check(&c, &[8]).unwrap());
    assert_eq!(m.values, vec![0]);
    assert_eq!(m.to_input_vector().bytes, vec![0]);
}

#[test]
fn forced_range_model() {
    let ctx = SolverCtx::new();
    let mut c = Constraint::default();
    c.push(expr::bin(BvBinOp::Ult, c8(250), x8()));
    let m = sat_model(ctx.check(&c, &[8]).unwrap());
    assert!(m.values[0] > 250, "got {}", m.values[0]);
    assert!(m.satisfies(&c));
}

#[test]
fn contradiction_is_unsat() {
    let ctx = SolverCtx::new();
    let mut c = Constraint::default();
    c.push(expr::bin(BvBinOp::Ult, c8(250), x8()));
    c.push(expr::bin(BvBinOp::Ult, x8(), c8(10)));
    assert_eq!(ctx.check(&c, &[8]).unwrap(), CheckResult::Unsat);
    assert!(enumerate_models(&c, &[8]).is_empty());
}

#[test]
fn unique_model_flips_all_unsat() {
    let ctx = SolverCtx::new();
    let mut c = Constraint::default();
    c.push(expr::bin(BvBinOp::Eq, x8(), c8(7)));
    let m = sat_model(ctx.check(&c, &[8]).unwrap());
    assert_eq!(m.values, vec![7]);
    for bit in 0..8 {
        assert_eq!(
            ctx.check_flip(&c, &[8], &m, bit).unwrap(),
            CheckResult::Unsat,
            "bit {bit}"
        );
    }
}

#[test]
fn flip_respects_constraint_and_differs() {
    let ctx = SolverCtx::new();
    let mut c = Constraint::default();
    c.push(expr::bin(BvBinOp::Ult, c8(250), x8()));
    let m = sat_model(ctx.check(&c, &[8]).unwrap());
    // Bit 2: enumerate 8-bit models with that bit flipped.
    let want = m.bit(2);
    match ctx.check_flip(&c, &[8], &m, 2).unwrap() {
        CheckResult::Sat(m2) => {
            assert!(m2.satisfies(&c));
            assert_ne!(m2.bit(2), want);
        }
        CheckResult::Unsat => {
            // Then no enumerated model may disagree with m at bit 2.
            for vals in enumerate_models(&c, &[8]) {
                assert_eq!(vals[0] >> 2 & 1 == 1, want);
            }
        }
    }
}

#[test]
fn to_input_vector_little_endian() {
    let m = Model { site_widths: vec![16], values: vec![0x0102] };
    assert_eq!(m.to_input_vector().bytes, vec![0x02, 0x01]);
}

#[test]
fn model_determinism() {
    let mut c = Constraint::default();
    c.push(expr::bin(BvBinOp::Ult, c8(100), x8()));
    let a = sat_model(SolverCtx::new().check(&c, &[8]).unwrap());
    let b = sat_model(SolverCtx::new().check(&c, &[8]).unwrap());
    assert_eq!(a, b);
}

// ---------------------------------------------------------------------
// Randomized agreement with enumeration.
// ---------------------------------------------------------------------

/// Random 8-bit expression over sites 0 and 1.
fn arb_bv(depth: u32) -> BoxedStrategy<ExprRef> {
    let leaf = prop_oneof![
        (0u64..256).prop_map(|v| expr::cst(8, v)),
        (0u32..2).prop_map(|s| expr::site(s, 8)),
    ];
    leaf.prop_recursive(depth, 16, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone(), arb_arith_op()).prop_map(|(a, b, op)| {
                expr::bin(op, a, b)
            }),
            (inner.clone(), prop_oneof![Just(BvUnOp::Neg), Just(BvUnOp::BitNot)])
                .prop_map(|(a, op)| expr::un(op, a)),
        ]
    })
    .boxed()
}

fn arb_arith_op() -> BoxedStrategy<BvBinOp> {
    use BvBinOp::*;
    prop_oneof![
        Just(Add),
        Just(Sub),
        Just(Mul),
        Just(UDiv),
        Just(SDiv),
        Just(URem),
        Just(SRem),
        Just(BitAnd),
        Just(BitOr),
        Just(BitXor),
        Just(Shl),
        Just(LShr),
        Just(AShr),
    ]
    .boxed()
}

fn arb_cmp_op() -> BoxedStrategy<BvBinOp> {
    use BvBinOp::*;
    prop_oneof![Just(Eq), Just(Ne), Just(Ult), Just(Ule), Just(Slt), Just(Sle)].boxed()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    /// check() agrees with exhaustive enumeration on SAT/UNSAT, and Sat
    /// models actually satisfy the constraint.
    #[test]
    fn check_agrees_with_enumeration(
        a in arb_bv(2),
        b in arb_bv(2),
        op in arb_cmp_op(),
        a2 in arb_bv(2),
        b2 in arb_bv(2),
        op2 in arb_cmp_op(),
    ) {
        let mut c = Constraint::default();
        c.push(expr::bin(op, a, b));
        c.push(expr::bin(op2, a2, b2));
        let widths = [8u8, 8u8];
        let oracle = enumerate_models(&c, &widths);
        let ctx = SolverCtx::new();
        match ctx.check(&c, &widths).unwrap() {
            CheckResult::Sat(m) => {
                prop_assert!(!oracle.is_empty(), "solver Sat but oracle found no model");
                prop_assert!(m.satisfies(&c), "model {:?} does not satisfy", m.values);
            }
            CheckResult::Unsat => {
                prop_assert!(oracle.is_empty(), "solver Unsat but oracle found {:?}", oracle[0]);
            }
        }
    }

    /// Circuit semantics equal evaluator semantics: pin the expression to
    /// a concrete comparison and check a satisfying model exists exactly
    /// when eval says so for some input.
    #[test]
    fn flip_results_satisfy_and_differ(
        a in arb_bv(2),
        b in arb_bv(2),
        op in arb_cmp_op(),
        bit in 0u32..16,
    ) {
        let mut c = Constraint::default();
        c.push(expr::bin(op, a, b));
        let widths = [8u8, 8u8];
        let ctx = SolverCtx::new();
        if let CheckResult::Sat(m) = ctx.check(&c, &widths).unwrap() {
            match ctx.check_flip(&c, &widths, &m, bit).unwrap() {
                CheckResult::Sat(m2) => {
                    prop_assert!(m2.satisfies(&c));
                    prop_assert_ne!(m2.bit(bit), m.bit(bit));
                }
                CheckResult::Unsat => {
                    let fixed = m.bit(bit);
                    for vals in enumerate_models(&c, &widths) {
                        let mm = Model { site_widths: widths.to_vec(), values: vals };
                        prop_assert_eq!(mm.bit(bit), fixed);
                    }
                }
            }
        }
    }
}
