//! Pure bit-vector expression trees: the constraint language shared by
//! the symbolic executor, the solver and the sampler.
//!
//! Widths are 1 (booleans), 8, 16 or 32. Division and remainder are
//! total: `udiv(a, 0)` is all-ones, `urem(a, 0)` is `a`, and the signed
//! forms are derived by sign/magnitude decomposition. Shift amounts are
//! taken modulo the operand width. `eval` and the solver's bit-blasted
//! circuits implement identical semantics.
//!
//! The text form is a small s-expression language, documented in
//! `docs/constraints.md`:
//!
//! ```text
//! (sites 8 16)            ; input-site widths, in site order
//! (assert (ult (site 0 8) (const 8 251)))
//! (assert ...)            ; conjunction of all asserts
//! ```

use std::fmt;
use std::rc::Rc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BvUnOp {
    /// Two's-complement negation.
    Neg,
    /// Bitwise complement.
    BitNot,
    /// Boolean negation (width 1).
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BvBinOp {
    Add,
    Sub,
    Mul,
    UDiv,
    SDiv,
    URem,
    SRem,
    BitAnd,
    BitOr,
    BitXor,
    /// Shift left; amount taken modulo the width.
    Shl,
    /// Logical shift right; amount modulo the width.
    LShr,
    /// Arithmetic shift right; amount modulo the width.
    AShr,
    // Comparisons: operands share a width, result has width 1.
    Eq,
    Ne,
    Ult,
    Ule,
    Slt,
    Sle,
    // Boolean connectives on width-1 operands.
    And,
    Or,
}

impl BvBinOp {
    pub fn is_comparison(&self) -> bool {
        use BvBinOp::*;
        matches!(self, Eq | Ne | Ult | Ule | Slt | Sle)
    }

    fn name(&self) -> &'static str {
        use BvBinOp::*;
        match self {
            Add => "add",
            Sub => "sub",
            Mul => "mul",
            UDiv => "udiv",
            SDiv => "sdiv",
            URem => "urem",
            SRem => "srem",
            BitAnd => "bitand",
            BitOr => "bitor",
            BitXor => "bitxor",
            Shl => "shl",
            LShr => "lshr",
            AShr => "ashr",
            Eq => "eq",
            Ne => "ne",
            Ult => "ult",
            Ule => "ule",
            Slt => "slt",
            Sle => "sle",
            And => "and",
            Or => "or",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum BitVecExpr {
    Const { width: u8, value: u64 },
    /// One whole input site (`input(w)` read), identified by the dynamic
    /// read ordinal along the current path.
    Site { ordinal: u32, width: u8 },
    Un { op: BvUnOp, arg: Rc<BitVecExpr> },
    Bin { op: BvBinOp, a: Rc<BitVecExpr>, b: Rc<BitVecExpr> },
    /// Width conversion: zero-extend, sign-extend or truncate to `width`.
    ZExt { width: u8, arg: Rc<BitVecExpr> },
    SExt { width: u8, arg: Rc<BitVecExpr> },
    Trunc { width: u8, arg: Rc<BitVecExpr> },
}

pub type ExprRef = Rc<BitVecExpr>;

fn mask(width: u8, v: u64) -> u64 {
    if width >= 64 {
        v
    } else {
        v & ((1u64 << width) - 1)
    }
}

fn sign_extend(width: u8, v: u64) -> i64 {
    let shift = 64 - width as u32;
    ((mask(width, v) << shift) as i64) >> shift
}

impl BitVecExpr {
    pub fn width(&self) -> u8 {
        match self {
            BitVecExpr::Const { width, .. }
            | BitVecExpr::Site { width, .. }
            | BitVecExpr::ZExt { width, .. }
            | BitVecExpr::SExt { width, .. }
            | BitVecExpr::Trunc { width, .. } => *width,
            BitVecExpr::Un { op, arg } => match op {
                BvUnOp::Not => 1,
                _ => arg.width(),
            },
            BitVecExpr::Bin { op, a, .. } => {
                if op.is_comparison() || matches!(op, BvBinOp::And | BvBinOp::Or) {
                    1
                } else {
                    a.width()
                }
            }
        }
    }

    pub fn as_const(&self) -> Option<u64> {
        match self {
            BitVecExpr::Const { value, .. } => Some(*value),
            _ => None,
        }
    }

    /// Collect the input-site ordinals mentioned, with widths.
    pub fn collect_sites(&self, out: &mut std::collections::BTreeMap<u32, u8>) {
        match self {
            BitVecExpr::Const { .. } => {}
            BitVecExpr::Site { ordinal, width } => {
                out.insert(*ordinal, *width);
            }
            BitVecExpr::Un { arg, .. }
            | BitVecExpr::ZExt { arg, .. }
            | BitVecExpr::SExt { arg, .. }
            | BitVecExpr::Trunc { arg, .. } => arg.collect_sites(out),
            BitVecExpr::Bin { a, b, .. } => {
                a.collect_sites(out);
                b.collect_sites(out);
            }
        }
    }

    /// Evaluate under an assignment of values to input sites.
    pub fn eval(&self, env: &dyn Fn(u32) -> u64) -> u64 {
        match self {
            BitVecExpr::Const { value, .. } => *value,
            BitVecExpr::Site { ordinal, width } => mask(*width, env(*ordinal)),
            BitVecExpr::Un { op, arg } => {
                let w = arg.width();
                let v = arg.eval(env);
                match op {
                    BvUnOp::Neg => mask(w, v.wrapping_neg()),
                    BvUnOp::BitNot => mask(w, !v),
                    BvUnOp::Not => (v == 0) as u64,
                }
            }
            BitVecExpr::Bin { op, a, b } => {
                let w = a.width();
                let x = a.eval(env);
                let y = b.eval(env);
                eval_bin(*op, w, x, y)
            }
            BitVecExpr::ZExt { width, arg } => mask(*width, arg.eval(env)),
            BitVecExpr::SExt { width, arg } => {
                mask(*width, sign_extend(arg.width(), arg.eval(env)) as u64)
            }
            BitVecExpr::Trunc { width, arg } => mask(*width, arg.eval(env)),
        }
    }
}

/// Shared scalar semantics for the expression evaluator and tests.
pub fn eval_bin(op: BvBinOp, w: u8, x: u64, y: u64) -> u64 {
    use BvBinOp::*;
    let m = |v: u64| mask(w, v);
    let sx = || sign_extend(w, x);
    let sy = || sign_extend(w, y);
    match op {
        Add => m(x.wrapping_add(y)),
        Sub => m(x.wrapping_sub(y)),
        Mul => m(x.wrapping_mul(y)),
        UDiv => {
            if y == 0 {
                m(u64::MAX)
            } else {
                m(x / y)
            }
        }
        URem => {
            if y == 0 {
                x
            } else {
                m(x % y)
            }
        }
        SDiv => {
            // Sign/magnitude decomposition over the total unsigned ops.
            let (a, b) = (sx(), sy());
            let qa = a.unsigned_abs() & mask(w, u64::MAX);
            let qb = b.unsigned_abs() & mask(w, u64::MAX);
            let q = if qb == 0 { mask(w, u64::MAX) } else { mask(w, qa / qb) };
            if (a < 0) != (b < 0) {
                m(q.wrapping_neg())
            } else {
                q
            }
        }
        SRem => {
            let (a, b) = (sx(), sy());
            let qa = a.unsigned_abs() & mask(w, u64::MAX);
            let qb = b.unsigned_abs() & mask(w, u64::MAX);
            let r = if qb == 0 { qa } else { mask(w, qa % qb) };
            if a < 0 {
                m(r.wrapping_neg())
            } else {
                r
            }
        }
        BitAnd => m(x & y),
        BitOr => m(x | y),
        BitXor => m(x ^ y),
        Shl => m(x << (y % w as u64)),
        LShr => m(x >> (y % w as u64)),
        AShr => m((sign_extend(w, x) >> (y % w as u64)) as u64),
        Eq => (x == y) as u64,
        Ne => (x != y) as u64,
        Ult => (x < y) as u64,
        Ule => (x <= y) as u64,
        Slt => (sx() < sy()) as u64,
        Sle => (sx() <= sy()) as u64,
        And => (x != 0 && y != 0) as u64,
        Or => (x != 0 || y != 0) as u64,
    }
}

// ---------------------------------------------------------------------
// Smart constructors: constant folding plus the syntactic-equality rules
// that make tautological branch conditions fold away.
// ---------------------------------------------------------------------

pub fn cst(width: u8, value: u64) -> ExprRef {
    Rc::new(BitVecExpr::Const { width, value: mask(width, value) })
}

pub fn site(ordinal: u32, width: u8) -> ExprRef {
    Rc::new(BitVecExpr::Site { ordinal, width })
}

pub fn tru() -> ExprRef {
    cst(1, 1)
}

pub fn fls() -> ExprRef {
    cst(1, 0)
}

pub fn un(op: BvUnOp, arg: ExprRef) -> ExprRef {
    if let Some(v) = arg.as_const() {
        let w = arg.width();
        return match op {
            BvUnOp::Neg => cst(w, v.wrapping_neg()),
            BvUnOp::BitNot => cst(w, !v),
            BvUnOp::Not => cst(1, (v == 0) as u64),
        };
    }
    // !!e = e on booleans.
    if op == BvUnOp::Not {
        if let BitVecExpr::Un { op: BvUnOp::Not, arg: inner } = &*arg {
            return inner.clone();
        }
    }
    Rc::new(BitVecExpr::Un { op, arg })
}

pub fn bin(op: BvBinOp, a: ExprRef, b: ExprRef) -> ExprRef {
    debug_assert_eq!(a.width(), b.width(), "operand widths must agree for {op:?}");
    if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
        let w = a.width();
        let val = eval_bin(op, w, x, y);
        let rw = if op.is_comparison() || matches!(op, BvBinOp::And | BvBinOp::Or) { 1 } else { w };
        return cst(rw, val);
    }
    // Syntactically identical operands settle every comparison.
    if op.is_comparison() && a == b {
        use BvBinOp::*;
        let v = matches!(op, Eq | Ule | Sle);
        return cst(1, v as u64);
    }
    Rc::new(BitVecExpr::Bin { op, a, b })
}

pub fn zext(width: u8, arg: ExprRef) -> ExprRef {
    if arg.width() == width {
        return arg;
    }
    if let Some(v) = arg.as_const() {
        return cst(width, v);
    }
    Rc::new(BitVecExpr::ZExt { width, arg })
}

pub fn sext(width: u8, arg: ExprRef) -> ExprRef {
    if arg.width() == width {
        return arg;
    }
    if let Some(v) = arg.as_const() {
        return cst(width, sign_extend(arg.width(), v) as u64);
    }
    Rc::new(BitVecExpr::SExt { width, arg })
}

pub fn trunc(width: u8, arg: ExprRef) -> ExprRef {
    if arg.width() == width {
        return arg;
    }
    if let Some(v) = arg.as_const() {
        return cst(width, v);
    }
    Rc::new(BitVecExpr::Trunc { width, arg })
}

// ---------------------------------------------------------------------
// Constraints
// ---------------------------------------------------------------------

/// A path condition: the conjunction of an ordered list of width-1
/// expressions. The empty list is `true`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Constraint {
    pub conjuncts: Vec<ExprRef>,
}

/// Result of appending a conjunct.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Appended {
    /// The conjunct added information.
    Added,
    /// The conjunct folded to `true` or duplicated an existing conjunct;
    /// the constraint is unchanged (the tautology/redundancy trigger).
    Unchanged,
    /// The conjunct folded to `false`; the constraint is unsatisfiable.
    False,
}

impl Constraint {
    pub fn is_true(&self) -> bool {
        self.conjuncts.is_empty()
    }

    /// Append a conjunct with constant folding and syntactic-duplicate
    /// elimination.
    pub fn push(&mut self, c: ExprRef) -> Appended {
        debug_assert_eq!(c.width(), 1);
        match c.as_const() {
            Some(0) => return Appended::False,
            Some(_) => return Appended::Unchanged,
            None => {}
        }
        if self.conjuncts.iter().any(|e| **e == *c) {
            return Appended::Unchanged;
        }
        self.conjuncts.push(c);
        Appended::Added
    }

    pub fn and(&self, c: ExprRef) -> (Constraint, Appended) {
        let mut out = self.clone();
        let r = out.push(c);
        (out, r)
    }

    /// All input sites mentioned, ordinal → width.
    pub fn sites(&self) -> std::collections::BTreeMap<u32, u8> {
        let mut out = std::collections::BTreeMap::new();
        for c in &self.conjuncts {
            c.collect_sites(&mut out);
        }
        out
    }

    /// True iff the assignment satisfies every conjunct.
    pub fn eval(&self, env: &dyn Fn(u32) -> u64) -> bool {
        self.conjuncts.iter().all(|c| c.eval(env) != 0)
    }

    /// Canonical text form: one `(assert …)` line per conjunct, after a
    /// `(sites …)` header covering the given site widths.
    pub fn to_text(&self, site_widths: &[u8]) -> String {
        let mut out = String::from("(sites");
        for w in site_widths {
            out.push_str(&format!(" {w}"));
        }
        out.push_str(")\n");
        for c in &self.conjuncts {
            out.push_str(&format!("(assert {c})\n"));
        }
        out
    }
}

impl fmt::Display for BitVecExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BitVecExpr::Const { width, value } => write!(f, "(const {width} {value})"),
            BitVecExpr::Site { ordinal, width } => write!(f, "(site {ordinal} {width})"),
            BitVecExpr::Un { op, arg } => {
                let name = match op {
                    BvUnOp::Neg => "neg",
                    BvUnOp::BitNot => "bnot",
                    BvUnOp::Not => "not",
                };
                write!(f, "({name} {arg})")
            }
            BitVecExpr::Bin { op, a, b } => write!(f, "({} {a} {b})", op.name()),
            BitVecExpr::ZExt { width, arg } => write!(f, "(zext {width} {arg})"),
            BitVecExpr::SExt { width, arg } => write!(f, "(sext {width} {arg})"),
            BitVecExpr::Trunc { width, arg } => write!(f, "(trunc {width} {arg})"),
        }
    }
}

// ---------------------------------------------------------------------
// S-expression parsing (constraint files for the standalone CLIs)
// ---------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("constraint parse error: {0}")]
pub struct ConstraintParseError(pub String);

enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

fn parse_sexps(text: &str) -> Result<Vec<Sexp>, ConstraintParseError> {
    // Strip `;` line comments first.
    let stripped: String = text
        .lines()
        .map(|l| l.split_once(';').map(|(head, _)| head).unwrap_or(l))
        .collect::<Vec<_>>()
        .join("\n");
    let mut stack: Vec<Vec<Sexp>> = vec![Vec::new()];
    let mut atom = String::new();
    let flush = |atom: &mut String, stack: &mut Vec<Vec<Sexp>>| {
        if !atom.is_empty() {
            stack.last_mut().unwrap().push(Sexp::Atom(std::mem::take(atom)));
        }
    };
    for (i, ch) in stripped.char_indices() {
        match ch {
            '(' => {
                flush(&mut atom, &mut stack);
                stack.push(Vec::new());
            }
            ')' => {
                flush(&mut atom, &mut stack);
                let done = stack
                    .pop()
                    .ok_or_else(|| ConstraintParseError(format!("unbalanced `)` at byte {i}")))?;
                if stack.is_empty() {
                    return Err(ConstraintParseError(format!("unbalanced `)` at byte {i}")));
                }
                stack.last_mut().unwrap().push(Sexp::List(done));
            }
            c if c.is_whitespace() => flush(&mut atom, &mut stack),
            c => atom.push(c),
        }
    }
    flush(&mut atom, &mut stack);
    if stack.len() != 1 {
        return Err(ConstraintParseError("unbalanced `(`".into()));
    }
    Ok(stack.pop().unwrap())
}

fn expect_atom(s: &Sexp) -> Result<&str, ConstraintParseError> {
    match s {
        Sexp::Atom(a) => Ok(a),
        Sexp::List(_) => Err(ConstraintParseError("expected atom, found list".into())),
    }
}

fn parse_num(s: &Sexp) -> Result<u64, ConstraintParseError> {
    let a = expect_atom(s)?;
    let v = if let Some(hex) = a.strip_prefix("0x") {
        u64::from_str_radix(hex, 16)
    } else {
        a.parse()
    };
    v.map_err(|_| ConstraintParseError(format!("expected a number, found `{a}`")))
}

fn parse_expr_sexp(s: &Sexp) -> Result<ExprRef, ConstraintParseError> {
    let items = match s {
        Sexp::List(items) => items,
        Sexp::Atom(a) => {
            return Err(ConstraintParseError(format!("expected expression list, found `{a}`")))
        }
    };
    if items.is_empty() {
        return Err(ConstraintParseError("empty expression".into()));
    }
    let head = expect_atom(&items[0])?;
    let argc = items.len() - 1;
    let arity = |n: usize| -> Result<(), ConstraintParseError> {
        if argc == n {
            Ok(())
        } else {
            Err(ConstraintParseError(format!("`{head}` takes {n} argument(s), got {argc}")))
        }
    };
    let check_width = |w: u64| -> Result<u8, ConstraintParseError> {
        if matches!(w, 1 | 8 | 16 | 32) {
            Ok(w as u8)
        } else {
            Err(ConstraintParseError(format!("unsupported width {w}")))
        }
    };
    match head {
        "const" => {
            arity(2)?;
            let w = check_width(parse_num(&items[1])?)?;
            Ok(cst(w, parse_num(&items[2])?))
        }
        "site" => {
            arity(2)?;
            let ord = parse_num(&items[1])? as u32;
            let w = check_width(parse_num(&items[2])?)?;
            Ok(site(ord, w))
        }
        "neg" | "bnot" | "not" => {
            arity(1)?;
            let arg = parse_expr_sexp(&items[1])?;
            let op = match head {
                "neg" => BvUnOp::Neg,
                "bnot" => BvUnOp::BitNot,
                _ => BvUnOp::Not,
            };
            if op == BvUnOp::Not && arg.width() != 1 {
                return Err(ConstraintParseError("`not` takes a width-1 operand".into()));
            }
            Ok(un(op, arg))
        }
        "zext" | "sext" | "trunc" => {
            arity(2)?;
            let w = check_width(parse_num(&items[1])?)?;
            let arg = parse_expr_sexp(&items[2])?;
            Ok(match head {
                "zext" => zext(w, arg),
                "sext" => sext(w, arg),
                _ => trunc(w, arg),
            })
        }
        _ => {
            use BvBinOp::*;
            let op = match head {
                "add" => Add,
                "sub" => Sub,
                "mul" => Mul,
                "udiv" => UDiv,
                "sdiv" => SDiv,
                "urem" => URem,
                "srem" => SRem,
                "bitand" => BitAnd,
                "bitor" => BitOr,
                "bitxor" => BitXor,
                "shl" => Shl,
                "lshr" => LShr,
                "ashr" => AShr,
                "eq" => Eq,
                "ne" => Ne,
                "ult" => Ult,
                "ule" => Ule,
                "slt" => Slt,
                "sle" => Sle,
                "and" => And,
                "or" => Or,
                other => {
                    return Err(ConstraintParseError(format!("unknown operator `{other}`")))
                }
            };
            arity(2)?;
            let a = parse_expr_sexp(&items[1])?;
            let b = parse_expr_sexp(&items[2])?;
            if a.width() != b.width() {
                return Err(ConstraintParseError(format!(
                    "operand widths differ for `{head}`: {} vs {}",
                    a.width(),
                    b.width()
                )));
            }
            if matches!(op, And | Or) && a.width() != 1 {
                return Err(ConstraintParseError(format!("`{head}` takes width-1 operands")));
            }
            Ok(bin(op, a, b))
        }
    }
}

/// Parse a constraint file: a `(sites w0 w1 …)` header followed by zero
/// or more `(assert e)` forms.
pub fn parse_constraint_file(text: &str) -> Result<(Vec<u8>, Constraint), ConstraintParseError> {
    let forms = parse_sexps(text)?;
    let mut site_widths: Option<Vec<u8>> = None;
    let mut constraint = Constraint::default();
    for form in &forms {
        let items = match form {
            Sexp::List(items) if !items.is_empty() => items,
            _ => return Err(ConstraintParseError("top-level forms must be lists".into())),
        };
        match expect_atom(&items[0])? {
            "sites" => {
                if site_widths.is_some() {
                    return Err(ConstraintParseError("duplicate (sites …) header".into()));
                }
                let mut widths = Vec::new();
                for it in &items[1..] {
                    let w = parse_num(it)?;
                    if !matches!(w, 8 | 16 | 32) {
                        return Err(ConstraintParseError(format!("invalid site width {w}")));
                    }
                    widths.push(w as u8);
                }
                site_widths = Some(widths);
            }
            "assert" => {
                if items.len() != 2 {
                    return Err(ConstraintParseError("(assert …) takes one expression".into()));
                }
                let e = parse_expr_sexp(&items[1])?;
                if e.width() != 1 {
                    return Err(ConstraintParseError("asserted expression must have width 1".into()));
                }
                constraint.push(e);
            }
            other => return Err(ConstraintParseError(format!("unknown form `{other}`"))),
        }
    }
    let widths = site_widths
        .ok_or_else(|| ConstraintParseError("missing (sites …) header".into()))?;
    for (ord, w) in constraint.sites() {
        match widths.get(ord as usize) {
            Some(&dw) if dw == w => {}
            Some(&dw) => {
                return Err(ConstraintParseError(format!(
                    "site {ord} used at width {w} but declared {dw}"
                )))
            }
            None => {
                return Err(ConstraintParseError(format!("site {ord} not declared in header")))
            }
        }
    }
    Ok((widths, constraint))
}
