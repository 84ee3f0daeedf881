//! Lowering from the AST to the basic-block IR.
//!
//! Key invariants established here:
//! - every non-constant comparison in a condition becomes exactly one
//!   `Branch` terminator (short-circuit `&&`/`||` split into separate
//!   branches, `!` swaps the branch targets);
//! - conditions that fold to a literal constant become unconditional
//!   jumps (or a direct `AssertFail`), so they contribute no branch
//!   targets to coverage;
//! - untyped integer literals default to `i32` but adopt the type of a
//!   non-literal context (other operand, assignment target, parameter,
//!   return type) without changing evaluation order of side effects.

use std::collections::HashMap;

use super::ast::*;
use super::{LangError, Span};
use crate::ir::{self, Block, Instr, IrProgram, Slot, Terminator, Ty};

const I32: Ty = Ty { width: 32, signed: true };

struct Signature {
    index: u32,
    params: Vec<Ty>,
    ret: Option<Ty>,
}

pub fn lower(ast: &Ast) -> Result<IrProgram, LangError> {
    let mut sigs: HashMap<String, Signature> = HashMap::new();
    for (i, f) in ast.functions.iter().enumerate() {
        if sigs
            .insert(
                f.name.clone(),
                Signature {
                    index: i as u32,
                    params: f.params.iter().map(|(_, t)| *t).collect(),
                    ret: f.ret,
                },
            )
            .is_some()
        {
            return Err(LangError::Program(format!("duplicate function `{}`", f.name)));
        }
    }
    let entry = match sigs.get("main") {
        Some(sig) if sig.params.is_empty() => sig.index,
        Some(_) => return Err(LangError::Program("`main` must take no parameters".into())),
        None => return Err(LangError::Program("no `main` function".into())),
    };

    let mut input_widths = Vec::new();
    let mut functions = Vec::new();
    for decl in &ast.functions {
        let mut fl = FnLower {
            sigs: &sigs,
            decl,
            slot_tys: decl.params.iter().map(|(_, t)| *t).collect(),
            vars: decl
                .params
                .iter()
                .enumerate()
                .map(|(i, (n, _))| (n.clone(), i as Slot))
                .collect(),
            blocks: vec![Block { instrs: Vec::new(), term: Terminator::Abort }],
            cur: 0,
            input_widths: &mut input_widths,
        };
        for stmt in &decl.body {
            fl.stmt(stmt)?;
        }
        // Fallthrough at the end of the body: an implicit `return` for a
        // void function, an abort otherwise (unreachable join blocks from
        // fully-returning `if`/`else` land here too).
        let term = if decl.ret.is_none() { Terminator::Return(None) } else { Terminator::Abort };
        fl.terminate(term);
        functions.push(ir::Function {
            name: decl.name.clone(),
            n_params: decl.params.len() as u32,
            slot_tys: fl.slot_tys,
            blocks: fl.blocks,
            ret: decl.ret,
        });
    }

    let program = IrProgram { functions, entry_function: entry, input_widths };
    debug_assert_eq!(program.branch_count(), ast.expected_branch_count());
    Ok(program)
}

struct FnLower<'a> {
    sigs: &'a HashMap<String, Signature>,
    decl: &'a FunctionDecl,
    slot_tys: Vec<Ty>,
    vars: HashMap<String, Slot>,
    blocks: Vec<Block>,
    cur: usize,
    input_widths: &'a mut Vec<u8>,
}

impl<'a> FnLower<'a> {
    fn new_slot(&mut self, ty: Ty) -> Slot {
        self.slot_tys.push(ty);
        (self.slot_tys.len() - 1) as Slot
    }

    fn new_block(&mut self) -> u32 {
        self.blocks.push(Block { instrs: Vec::new(), term: Terminator::Abort });
        (self.blocks.len() - 1) as u32
    }

    fn emit(&mut self, instr: Instr) {
        self.blocks[self.cur].instrs.push(instr);
    }

    /// Seal the current block and open a fresh (possibly unreachable) one.
    fn terminate(&mut self, term: Terminator) {
        self.blocks[self.cur].term = term;
    }

    fn terminate_and_continue(&mut self, term: Terminator) {
        self.terminate(term);
        let next = self.new_block();
        self.cur = next as usize;
    }

    fn switch_to(&mut self, block: u32) {
        self.cur = block as usize;
    }

    /// A fresh block that only jumps to `target`.
    fn trampoline(&mut self, target: u32) -> u32 {
        let b = self.new_block();
        self.blocks[b as usize].term = Terminator::Jump(target);
        b
    }

    fn const_slot(&mut self, value: i128, ty: Ty) -> Slot {
        let dst = self.new_slot(ty);
        self.emit(Instr::Const { dst, value: ty.mask(value as u64) });
        dst
    }

    fn stmt(&mut self, s: &Stmt) -> Result<(), LangError> {
        match s {
            Stmt::Assign { name, expr, span } => {
                if let Some(&slot) = self.vars.get(name) {
                    let ty = self.slot_tys[slot as usize];
                    let (src, got) = self.expr(expr, Some(ty))?;
                    if got != ty {
                        return Err(LangError::TypeMismatch {
                            span: *span,
                            msg: format!("cannot assign {got} to `{name}: {ty}`"),
                        });
                    }
                    self.emit(Instr::Copy { dst: slot, src });
                } else {
                    let (src, ty) = self.expr(expr, None)?;
                    let slot = self.new_slot(ty);
                    self.vars.insert(name.clone(), slot);
                    self.emit(Instr::Copy { dst: slot, src });
                }
                Ok(())
            }
            Stmt::If { cond, then_body, else_body, .. } => {
                let then_b = self.new_block();
                let join = self.new_block();
                let else_b = if else_body.is_empty() { join } else { self.new_block() };
                self.cond(cond, then_b, else_b)?;
                self.switch_to(then_b);
                for s in then_body {
                    self.stmt(s)?;
                }
                self.terminate(Terminator::Jump(join));
                if !else_body.is_empty() {
                    self.switch_to(else_b);
                    for s in else_body {
                        self.stmt(s)?;
                    }
                    self.terminate(Terminator::Jump(join));
                }
                self.switch_to(join);
                Ok(())
            }
            Stmt::While { cond, body, .. } => {
                let header = self.new_block();
                self.terminate(Terminator::Jump(header));
                self.switch_to(header);
                let body_b = self.new_block();
                let exit = self.new_block();
                self.cond(cond, body_b, exit)?;
                self.switch_to(body_b);
                for s in body {
                    self.stmt(s)?;
                }
                self.terminate(Terminator::Jump(header));
                self.switch_to(exit);
                Ok(())
            }
            Stmt::Return { expr, span } => {
                match (expr, self.decl.ret) {
                    (None, None) => self.terminate_and_continue(Terminator::Return(None)),
                    (Some(e), Some(ret_ty)) => {
                        let (slot, got) = self.expr(e, Some(ret_ty))?;
                        if got != ret_ty {
                            return Err(LangError::TypeMismatch {
                                span: *span,
                                msg: format!("return type is {ret_ty}, expression has {got}"),
                            });
                        }
                        self.terminate_and_continue(Terminator::Return(Some(slot)));
                    }
                    (None, Some(ret_ty)) => {
                        return Err(LangError::TypeMismatch {
                            span: *span,
                            msg: format!("return type is {ret_ty}, no value returned"),
                        })
                    }
                    (Some(_), None) => {
                        return Err(LangError::TypeMismatch {
                            span: *span,
                            msg: "function has no return type".into(),
                        })
                    }
                }
                Ok(())
            }
            Stmt::Assert { cond, .. } => {
                match const_fold_bool(cond) {
                    Some(true) => {}
                    Some(false) => self.terminate_and_continue(Terminator::AssertFail),
                    None => {
                        let fail = self.new_block();
                        self.blocks[fail as usize].term = Terminator::AssertFail;
                        let cont = self.new_block();
                        self.cond(cond, cont, fail)?;
                        self.switch_to(cont);
                    }
                }
                Ok(())
            }
            Stmt::Abort { .. } => {
                self.terminate_and_continue(Terminator::Abort);
                Ok(())
            }
            Stmt::ExprStmt { expr, .. } => {
                if let Expr::Call { name, args, span } = expr {
                    self.call(name, args, *span, true)?;
                } else {
                    self.expr(expr, None)?;
                }
                Ok(())
            }
        }
    }

    /// Lower a condition, sealing the current block with control flow into
    /// `on_true`/`on_false`.
    fn cond(&mut self, e: &Expr, on_true: u32, on_false: u32) -> Result<(), LangError> {
        if let Some(v) = const_fold_bool(e) {
            self.terminate(Terminator::Jump(if v { on_true } else { on_false }));
            return Ok(());
        }
        match e {
            Expr::Bin { op: AstBinOp::AndAnd, lhs, rhs, .. } => {
                match const_fold_bool(lhs) {
                    Some(true) => self.cond(rhs, on_true, on_false),
                    Some(false) => {
                        self.terminate(Terminator::Jump(on_false));
                        Ok(())
                    }
                    None => {
                        let mid = self.new_block();
                        self.cond(lhs, mid, on_false)?;
                        self.switch_to(mid);
                        // A constant-true rhs still jumps, keeping the
                        // lhs branch as the only decision point.
                        self.cond(rhs, on_true, on_false)
                    }
                }
            }
            Expr::Bin { op: AstBinOp::OrOr, lhs, rhs, .. } => match const_fold_bool(lhs) {
                Some(true) => {
                    self.terminate(Terminator::Jump(on_true));
                    Ok(())
                }
                Some(false) => self.cond(rhs, on_true, on_false),
                None => {
                    let mid = self.new_block();
                    self.cond(lhs, on_true, mid)?;
                    self.switch_to(mid);
                    self.cond(rhs, on_true, on_false)
                }
            },
            Expr::Un { op: AstUnOp::Not, arg, .. } => self.cond(arg, on_false, on_true),
            Expr::Bin { op, lhs, rhs, span } if op.is_comparison() => {
                let (a, b, _) = self.bin_operands(lhs, rhs, None, *span)?;
                let dst = self.new_slot(Ty::B1);
                self.emit(Instr::Bin { op: map_binop(*op), dst, a, b });
                // Give every arm its own target block. Short-circuit legs
                // would otherwise share join targets, conflating distinct
                // arms in traces and branch-coverage accounting.
                let arm_true = self.trampoline(on_true);
                let arm_false = self.trampoline(on_false);
                self.terminate(Terminator::Branch {
                    cond: dst,
                    on_true: arm_true,
                    on_false: arm_false,
                });
                Ok(())
            }
            other => Err(LangError::TypeMismatch {
                span: other.span(),
                msg: "condition must be a comparison (or `&&`/`||`/`!` thereof)".into(),
            }),
        }
    }

    /// Lower a value expression. `want` is a type hint consumed only by
    /// all-literal subexpressions; it never overrides a concrete type.
    fn expr(&mut self, e: &Expr, want: Option<Ty>) -> Result<(Slot, Ty), LangError> {
        if let Some(v) = const_fold_int(e) {
            let ty = want.unwrap_or(I32);
            return Ok((self.const_slot(v, ty), ty));
        }
        match e {
            Expr::Literal { .. } => unreachable!("literals always fold"),
            Expr::Var { name, span } => {
                let slot = *self.vars.get(name).ok_or_else(|| LangError::UnknownIdentifier {
                    name: name.clone(),
                    span: *span,
                })?;
                Ok((slot, self.slot_tys[slot as usize]))
            }
            Expr::Input { width, .. } => {
                let site = self.input_widths.len() as u32;
                self.input_widths.push(*width);
                let ty = Ty::unsigned(*width);
                let dst = self.new_slot(ty);
                self.emit(Instr::Input { dst, width: *width, site });
                Ok((dst, ty))
            }
            Expr::ChooseConcrete { arg, .. } => {
                let (src, ty) = self.expr(arg, want)?;
                let dst = self.new_slot(ty);
                self.emit(Instr::ChooseConcrete { dst, src });
                Ok((dst, ty))
            }
            Expr::Call { name, args, span } => {
                let (slot, ty) = self.call(name, args, *span, false)?;
                Ok((slot.expect("non-discarded call has a slot"), ty.unwrap()))
            }
            Expr::Un { op: AstUnOp::Not, span, .. } => Err(LangError::TypeMismatch {
                span: *span,
                msg: "boolean expression used as a value".into(),
            }),
            Expr::Un { op, arg, .. } => {
                let (src, ty) = self.expr(arg, want)?;
                let dst = self.new_slot(ty);
                let op = match op {
                    AstUnOp::Neg => ir::UnOp::Neg,
                    AstUnOp::BitNot => ir::UnOp::BitNot,
                    AstUnOp::Not => unreachable!(),
                };
                self.emit(Instr::Un { op, dst, src });
                Ok((dst, ty))
            }
            Expr::Bin { op, span, .. } if op.is_comparison() || op.is_short_circuit() => {
                Err(LangError::TypeMismatch {
                    span: *span,
                    msg: "boolean expression used as a value".into(),
                })
            }
            Expr::Bin { op, lhs, rhs, span } => {
                let (a, b, ty) = self.bin_operands(lhs, rhs, want, *span)?;
                let dst = self.new_slot(ty);
                self.emit(Instr::Bin { op: map_binop(*op), dst, a, b });
                Ok((dst, ty))
            }
            Expr::Cast { arg, ty, .. } => {
                let (src, _) = self.expr(arg, None)?;
                let dst = self.new_slot(*ty);
                self.emit(Instr::Cast { dst, src });
                Ok((dst, *ty))
            }
        }
    }

    /// Lower both operands of a binary operator with mutual literal
    /// coercion. All-literal operands adopt the other side's type and are
    /// emitted as constants, so side-effect order is unaffected.
    fn bin_operands(
        &mut self,
        lhs: &Expr,
        rhs: &Expr,
        want: Option<Ty>,
        span: Span,
    ) -> Result<(Slot, Slot, Ty), LangError> {
        let lc = const_fold_int(lhs);
        let rc = const_fold_int(rhs);
        match (lc, rc) {
            (Some(la), Some(rb)) => {
                let ty = want.unwrap_or(I32);
                Ok((self.const_slot(la, ty), self.const_slot(rb, ty), ty))
            }
            (Some(la), None) => {
                let (b, ty) = self.expr(rhs, want)?;
                Ok((self.const_slot(la, ty), b, ty))
            }
            (None, Some(rb)) => {
                let (a, ty) = self.expr(lhs, want)?;
                Ok((a, self.const_slot(rb, ty), ty))
            }
            (None, None) => {
                let (a, ta) = self.expr(lhs, want)?;
                let (b, tb) = self.expr(rhs, Some(ta))?;
                if ta != tb {
                    return Err(LangError::TypeMismatch {
                        span,
                        msg: format!("operand types differ: {ta} vs {tb}"),
                    });
                }
                Ok((a, b, ta))
            }
        }
    }

    fn call(
        &mut self,
        name: &str,
        args: &[Expr],
        span: Span,
        discard: bool,
    ) -> Result<(Option<Slot>, Option<Ty>), LangError> {
        let (func, params, ret) = {
            let sig = self.sigs.get(name).ok_or_else(|| LangError::UnknownIdentifier {
                name: name.to_string(),
                span,
            })?;
            (sig.index, sig.params.clone(), sig.ret)
        };
        if args.len() != params.len() {
            return Err(LangError::TypeMismatch {
                span,
                msg: format!("`{name}` takes {} argument(s), got {}", params.len(), args.len()),
            });
        }
        let mut arg_slots = Vec::with_capacity(args.len());
        for (arg, &pty) in args.iter().zip(&params) {
            let (slot, got) = self.expr(arg, Some(pty))?;
            if got != pty {
                return Err(LangError::TypeMismatch {
                    span: arg.span(),
                    msg: format!("argument has type {got}, parameter is {pty}"),
                });
            }
            arg_slots.push(slot);
        }
        let (dst, ret_ty) = match ret {
            Some(ty) if !discard => (Some(self.new_slot(ty)), Some(ty)),
            Some(ty) if discard => (None, Some(ty)),
            None if !discard => {
                return Err(LangError::TypeMismatch {
                    span,
                    msg: format!("`{name}` has no return value"),
                })
            }
            _ => (None, None),
        };
        self.emit(Instr::Call { dst, func, args: arg_slots });
        Ok((dst, ret_ty))
    }
}

fn map_binop(op: AstBinOp) -> ir::BinOp {
    match op {
        AstBinOp::Add => ir::BinOp::Add,
        AstBinOp::Sub => ir::BinOp::Sub,
        AstBinOp::Mul => ir::BinOp::Mul,
        AstBinOp::Div => ir::BinOp::Div,
        AstBinOp::Rem => ir::BinOp::Rem,
        AstBinOp::BitAnd => ir::BinOp::And,
        AstBinOp::BitOr => ir::BinOp::Or,
        AstBinOp::BitXor => ir::BinOp::Xor,
        AstBinOp::Shl => ir::BinOp::Shl,
        AstBinOp::Shr => ir::BinOp::Shr,
        AstBinOp::Eq => ir::BinOp::Eq,
        AstBinOp::Ne => ir::BinOp::Ne,
        AstBinOp::Lt => ir::BinOp::Lt,
        AstBinOp::Le => ir::BinOp::Le,
        AstBinOp::Gt => ir::BinOp::Gt,
        AstBinOp::Ge => ir::BinOp::Ge,
        AstBinOp::AndAnd | AstBinOp::OrOr => unreachable!("short-circuit ops lower to branches"),
    }
}
