use super::Span;
use crate::ir::Ty;

#[derive(Debug, Clone)]
pub struct Ast {
    pub functions: Vec<FunctionDecl>,
}

#[derive(Debug, Clone)]
pub struct FunctionDecl {
    pub name: String,
    pub params: Vec<(String, Ty)>,
    pub ret: Option<Ty>,
    pub body: Vec<Stmt>,
    pub span: Span,
}

#[derive(Debug, Clone)]
pub enum Stmt {
    Assign { name: String, expr: Expr, span: Span },
    If { cond: Expr, then_body: Vec<Stmt>, else_body: Vec<Stmt>, span: Span },
    While { cond: Expr, body: Vec<Stmt>, span: Span },
    Return { expr: Option<Expr>, span: Span },
    Assert { cond: Expr, span: Span },
    Abort { span: Span },
    ExprStmt { expr: Expr, span: Span },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AstUnOp {
    Neg,
    BitNot,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AstBinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    BitAnd,
    BitOr,
    BitXor,
    Shl,
    Shr,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    AndAnd,
    OrOr,
}

impl AstBinOp {
    pub fn is_comparison(&self) -> bool {
        matches!(
            self,
            AstBinOp::Eq | AstBinOp::Ne | AstBinOp::Lt | AstBinOp::Le | AstBinOp::Gt | AstBinOp::Ge
        )
    }

    pub fn is_short_circuit(&self) -> bool {
        matches!(self, AstBinOp::AndAnd | AstBinOp::OrOr)
    }
}

#[derive(Debug, Clone)]
pub enum Expr {
    Literal { value: u64, span: Span },
    Var { name: String, span: Span },
    Input { width: u8, span: Span },
    ChooseConcrete { arg: Box<Expr>, span: Span },
    Call { name: String, args: Vec<Expr>, span: Span },
    Un { op: AstUnOp, arg: Box<Expr>, span: Span },
    Bin { op: AstBinOp, lhs: Box<Expr>, rhs: Box<Expr>, span: Span },
    Cast { arg: Box<Expr>, ty: Ty, span: Span },
}

impl Expr {
    pub fn span(&self) -> Span {
        match self {
            Expr::Literal { span, .. }
            | Expr::Var { span, .. }
            | Expr::Input { span, .. }
            | Expr::ChooseConcrete { span, .. }
            | Expr::Call { span, .. }
            | Expr::Un { span, .. }
            | Expr::Bin { span, .. }
            | Expr::Cast { span, .. } => *span,
        }
    }
}

impl Ast {
    /// Count the `Branch` terminators that lowering will emit: one per
    /// non-constant comparison leaf reachable in each `if`/`while`/`assert`
    /// condition. Conditions that fold to a literal constant lower to
    /// jumps instead of branches.
    pub fn expected_branch_count(&self) -> usize {
        fn leaves(e: &Expr) -> usize {
            match e {
                Expr::Bin { op, lhs, rhs, .. } if op.is_short_circuit() => {
                    leaves(lhs) + leaves(rhs)
                }
                Expr::Un { op: AstUnOp::Not, arg, .. } => leaves(arg),
                e => {
                    if const_fold_bool(e).is_some() {
                        0
                    } else {
                        1
                    }
                }
            }
        }
        fn walk(stmts: &[Stmt]) -> usize {
            let mut n = 0;
            for s in stmts {
                match s {
                    Stmt::If { cond, then_body, else_body, .. } => {
                        n += leaves(cond) + walk(then_body) + walk(else_body);
                    }
                    Stmt::While { cond, body, .. } => n += leaves(cond) + walk(body),
                    Stmt::Assert { cond, .. } => n += leaves(cond),
                    _ => {}
                }
            }
            n
        }
        self.functions.iter().map(|f| walk(&f.body)).sum()
    }
}

/// Fold a boolean expression made only of literals, if possible.
pub fn const_fold_bool(e: &Expr) -> Option<bool> {
    match e {
        Expr::Bin { op, lhs, rhs, .. } if op.is_comparison() => {
            let a = const_fold_int(lhs)?;
            let b = const_fold_int(rhs)?;
            Some(match op {
                AstBinOp::Eq => a == b,
                AstBinOp::Ne => a != b,
                AstBinOp::Lt => a < b,
                AstBinOp::Le => a <= b,
                AstBinOp::Gt => a > b,
                AstBinOp::Ge => a >= b,
                _ => unreachable!(),
            })
        }
        Expr::Bin { op: AstBinOp::AndAnd, lhs, rhs, .. } => {
            Some(const_fold_bool(lhs)? && const_fold_bool(rhs)?)
        }
        Expr::Bin { op: AstBinOp::OrOr, lhs, rhs, .. } => {
            Some(const_fold_bool(lhs)? || const_fold_bool(rhs)?)
        }
        Expr::Un { op: AstUnOp::Not, arg, .. } => Some(!const_fold_bool(arg)?),
        _ => None,
    }
}

/// Fold an integer expression made only of literals (exact 128-bit math;
/// overflow or division by zero makes the expression non-constant).
pub fn const_fold_int(e: &Expr) -> Option<i128> {
    match e {
        Expr::Literal { value, .. } => Some(*value as i128),
        Expr::Un { op: AstUnOp::Neg, arg, .. } => const_fold_int(arg)?.checked_neg(),
        Expr::Un { op: AstUnOp::BitNot, arg, .. } => Some(!const_fold_int(arg)?),
        Expr::Bin { op, lhs, rhs, .. } => {
            let a = const_fold_int(lhs)?;
            let b = const_fold_int(rhs)?;
            match op {
                AstBinOp::Add => a.checked_add(b),
                AstBinOp::Sub => a.checked_sub(b),
                AstBinOp::Mul => a.checked_mul(b),
                AstBinOp::Div => a.checked_div(b),
                AstBinOp::Rem => a.checked_rem(b),
                AstBinOp::BitAnd => Some(a & b),
                AstBinOp::BitOr => Some(a | b),
                AstBinOp::BitXor => Some(a ^ b),
                AstBinOp::Shl => {
                    if (0..64).contains(&b) {
                        a.checked_shl(b as u32)
                    } else {
                        None
                    }
                }
                AstBinOp::Shr => {
                    if (0..64).contains(&b) {
                        a.checked_shr(b as u32)
                    } else {
                        None
                    }
                }
                _ => None,
            }
        }
        _ => None,
    }
}
