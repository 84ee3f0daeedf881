//! Front end: parsing and lowering to the block IR.

use std::path::PathBuf;

use legion::ir::{IrProgram, Terminator};
use legion::lang::{lower, parse, LangError, SourceProgram};

fn compile(text: &str) -> IrProgram {
    lower(&parse(&SourceProgram::from_text(text)).expect("parse")).expect("lower")
}

fn bench(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../bench").join(name);
    std::fs::read_to_string(p).expect("read bench")
}

fn branch_terminators(p: &IrProgram) -> usize {
    p.functions
        .iter()
        .flat_map(|f| &f.blocks)
        .filter(|b| matches!(b.term, Terminator::Branch { .. }))
        .count()
}

#[test]
fn minimal_program_parses() {
    let ast = parse(&SourceProgram::from_text("fn main() { }")).expect("parse");
    assert_eq!(ast.functions.len(), 1);
    assert_eq!(ast.functions[0].name, "main");
    assert!(ast.functions[0].body.is_empty());
}

#[test]
fn single_if_with_input_site() {
    let text = "fn main() { x = input(8); if (x > 250) { abort(); } }";
    let ast = parse(&SourceProgram::from_text(text)).expect("parse");
    assert_eq!(ast.functions.len(), 1);
    let p = compile(text);
    assert_eq!(branch_terminators(&p), 1);
    assert_eq!(p.total_input_bits(), 8);
}

#[test]
fn malformed_input_is_a_syntax_error() {
    let r = parse(&SourceProgram::from_text("fn main() { if } "));
    assert!(matches!(r, Err(LangError::SyntaxError { .. })), "got {r:?}");
}

#[test]
fn abort_statement_and_call_forms_agree() {
    let a = compile("fn main() { abort; }");
    let b = compile("fn main() { abort(); }");
    assert_eq!(a.dump(), b.dump());
}

#[test]
fn empty_main_lowers_to_single_return_block() {
    let p = compile("fn main(){}");
    assert_eq!(p.functions.len(), 1);
    assert_eq!(p.functions[0].blocks.len(), 1);
    assert!(matches!(
        p.functions[0].blocks[0].term,
        Terminator::Return(_)
    ));
}

#[test]
fn one_if_lowers_to_one_branch_and_three_plus_blocks() {
    let p = compile("fn main() { x = input(8); if (x > 3) { y = 1; } }");
    assert_eq!(branch_terminators(&p), 1);
    assert!(p.functions[0].blocks.len() >= 3);
}

/// Independent oracle: count conditionals the IR must branch on by
/// scanning the source text (if, while, &&, ||), and compare with the
/// lowered Branch-terminator count.
#[test]
fn ackermann_branch_count_matches_source_walk() {
    let text = bench("ackermann.mini");
    let stripped: String = text
        .lines()
        .map(|l| l.split("//").next().unwrap_or(""))
        .collect::<Vec<_>>()
        .join("\n");
    let count = |pat: &str| stripped.matches(pat).count();
    let expected = count("if ") + count("if(") + count("while ") + count("while(")
        + count("&&")
        + count("||");
    let p = compile(&text);
    assert_eq!(
        branch_terminators(&p),
        expected,
        "Branch terminators must match the source-walk conditional count"
    );
}

#[test]
fn branch_addresses_empty_for_straightline() {
    let p = compile("fn main() { x = input(8); }");
    assert!(p.branch_addresses().is_empty());
}

#[test]
fn branch_addresses_two_per_conditional() {
    let p = compile("fn main() { x = input(8); if (x > 3) { y = 1; } }");
    assert_eq!(p.branch_addresses().len(), 2);
    let a = compile(&bench("ackermann.mini"));
    assert_eq!(a.branch_addresses().len(), 2 * branch_terminators(&a));
}

#[test]
fn input_width_must_be_supported() {
    let r = parse(&SourceProgram::from_text("fn main() { x = input(7); }"))
        .and_then(|ast| lower(&ast));
    assert!(r.is_err(), "input(7) must be rejected");
}

#[test]
fn missing_main_is_rejected() {
    let r = parse(&SourceProgram::from_text("fn other() { }")).and_then(|ast| lower(&ast));
    assert!(r.is_err());
}

#[test]
fn all_bundled_benchmarks_compile() {
    for name in [
        "ackermann.mini",
        "chokepoint.mini",
        "eqchain.mini",
        "rangeweave.mini",
        "tautology.mini",
        "mismatch.mini",
        "straightline.mini",
    ] {
        let p = compile(&bench(name));
        assert!(!p.functions.is_empty(), "{name}");
    }
}
