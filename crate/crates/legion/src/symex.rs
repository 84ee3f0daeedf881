//! Lazy symbolic execution: compute path conditions one branch decision
//! at a time, starting from the state attached to the nearest solid
//! ancestor in the search tree.
//!
//! States are immutable values; every operation returns fresh states.
//! Wall-clock limits are modelled as a deterministic budget counted in
//! interpreted IR instructions.

use crate::concrete::Outcome;
use crate::expr::{self, Appended, BvBinOp, BvUnOp, Constraint, ExprRef};
use crate::ir::{Address, BinOp, Instr, IrProgram, Slot, Terminator, UnOp};
use crate::solver::{CheckResult, SolverCtx};

pub const DEFAULT_SYMEX_BUDGET: u64 = 100_000;

#[derive(Debug, Clone, PartialEq, Eq)]
struct SymFrame {
    func: u32,
    block: u32,
    instr: usize,
    slots: Vec<ExprRef>,
    ret_dst: Option<Slot>,
}

/// A program point plus the path condition that steers execution to it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolicState {
    frames: Vec<SymFrame>,
    pub pc: Constraint,
    /// The branch-target address this state sits at (program entry for
    /// the root state).
    pub at: Address,
    /// Widths of the input sites read so far along this path, indexed by
    /// dynamic read ordinal — the site universe of `pc`.
    pub site_widths: Vec<u8>,
    /// True once a concretization intrinsic has narrowed this path:
    /// the path condition is then an under-approximation, so no
    /// full-exploration claim may rest on it.
    pub approx: bool,
}

impl SymbolicState {
    pub fn next_input_ordinal(&self) -> u32 {
        self.site_widths.len() as u32
    }
}

/// What lies beyond a state, after straight-line execution up to the
/// next decision point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Continuation {
    /// The next decision, with one entry per arm.
    Branch { arms: Vec<Arm>, infeasible: Vec<Address> },
    /// Execution ends without another decision. Carries the input-site
    /// widths read by the whole run (so a sampler for this region knows
    /// the full extent of the input it should vary) and whether the run
    /// passed a concretization intrinsic (making the terminal claim an
    /// under-approximation).
    Terminal { outcome: Outcome, site_widths: Vec<u8>, approx: bool },
    /// The symbolic step budget ran out; site widths read so far.
    Budget { site_widths: Vec<u8> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Arm {
    pub addr: Address,
    pub state: SymbolicState,
    /// False when the arm's conjunct folded away or duplicated an
    /// existing conjunct — the tautology/duplicate redundancy trigger.
    pub pc_changed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum SymexError {
    #[error("target address is not an arm of the next branch")]
    MalformedTarget,
}

/// Result of `step_to`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepResult {
    Ok { state: SymbolicState, pc_changed: bool },
    Infeasible,
    Budget,
}

pub fn initial_state(p: &IrProgram) -> SymbolicState {
    let entry = p.function(p.entry_function);
    let zero = expr::cst(32, 0);
    SymbolicState {
        frames: vec![SymFrame {
            func: p.entry_function,
            block: 0,
            instr: 0,
            slots: entry
                .slot_tys
                .iter()
                .map(|ty| {
                    if ty.width == 32 {
                        zero.clone()
                    } else {
                        expr::cst(ty.width, 0)
                    }
                })
                .collect(),
            ret_dst: None,
        }],
        pc: Constraint::default(),
        at: p.entry(),
        site_widths: Vec::new(),
        approx: false,
    }
}

enum RunStop {
    /// Positioned at a Branch terminator of the top frame.
    Branch { state: SymbolicState, cond: ExprRef, on_true: Address, on_false: Address },
    Terminal(Outcome, Vec<u8>, bool),
    Budget(Vec<u8>),
}

/// Execute straight-line code symbolically until the next Branch
/// terminator, a terminal, or budget exhaustion.
fn run_to_branch(
    p: &IrProgram,
    start: &SymbolicState,
    solver: &SolverCtx,
    step_cap: u64,
) -> RunStop {
    let mut s = start.clone();
    let mut steps: u64 = 0;
    loop {
        if steps >= step_cap {
            return RunStop::Budget(s.site_widths.clone());
        }
        let frame = s.frames.last_mut().expect("symbolic frame stack never empty");
        let func = p.function(frame.func);
        let block = &func.blocks[frame.block as usize];

        if frame.instr < block.instrs.len() {
            let instr = &block.instrs[frame.instr];
            frame.instr += 1;
            steps += 1;
            match instr {
                Instr::Const { dst, value } => {
                    let ty = func.slot_tys[*dst as usize];
                    frame.slots[*dst as usize] = expr::cst(ty.width, *value);
                }
                Instr::Copy { dst, src } => {
                    frame.slots[*dst as usize] = frame.slots[*src as usize].clone();
                }
                Instr::Un { op, dst, src } => {
                    let a = frame.slots[*src as usize].clone();
                    frame.slots[*dst as usize] = match op {
                        UnOp::Neg => expr::un(BvUnOp::Neg, a),
                        UnOp::BitNot => expr::un(BvUnOp::BitNot, a),
                    };
                }
                Instr::Bin { op, dst, a, b } => {
                    let ty = func.slot_tys[*a as usize];
                    let x = frame.slots[*a as usize].clone();
                    let y = frame.slots[*b as usize].clone();
                    // Division needs a zero guard on the path condition
                    // when the divisor is symbolic.
                    if matches!(op, BinOp::Div | BinOp::Rem) {
                        match y.as_const() {
                            Some(0) => {
                                return RunStop::Terminal(
                                    Outcome::RuntimeError,
                                    s.site_widths.clone(),
                                    s.approx,
                                )
                            }
                            Some(_) => {}
                            None => {
                                let guard =
                                    expr::bin(BvBinOp::Ne, y.clone(), expr::cst(ty.width, 0));
                                if s.pc.push(guard) == Appended::False {
                                    return RunStop::Terminal(
                                        Outcome::RuntimeError,
                                        s.site_widths.clone(),
                                        s.approx,
                                    );
                                }
                            }
                        }
                    }
                    // `a > b` is `b < a`: Gt/Ge swap operands here since
                    // the expression language only has less-than forms.
                    let (x, y, bv_op) = match op {
                        BinOp::Gt => {
                            (y, x, if ty.signed { BvBinOp::Slt } else { BvBinOp::Ult })
                        }
                        BinOp::Ge => {
                            (y, x, if ty.signed { BvBinOp::Sle } else { BvBinOp::Ule })
                        }
                        _ => (x, y, translate_binop(*op, ty.signed)),
                    };
                    // Reborrow: s.pc push above required releasing frame.
                    let frame = s.frames.last_mut().unwrap();
                    frame.slots[*dst as usize] = expr::bin(bv_op, x, y);
                }
                Instr::Cast { dst, src } => {
                    let src_ty = func.slot_tys[*src as usize];
                    let dst_ty = func.slot_tys[*dst as usize];
                    let a = frame.slots[*src as usize].clone();
                    frame.slots[*dst as usize] = if dst_ty.width <= src_ty.width {
                        expr::trunc(dst_ty.width, a)
                    } else if src_ty.signed {
                        expr::sext(dst_ty.width, a)
                    } else {
                        expr::zext(dst_ty.width, a)
                    };
                }
                Instr::Input { dst, width, .. } => {
                    let ordinal = s.site_widths.len() as u32;
                    s.site_widths.push(*width);
                    let frame = s.frames.last_mut().unwrap();
                    frame.slots[*dst as usize] = expr::site(ordinal, *width);
                }
                Instr::ChooseConcrete { dst, src } => {
                    s.approx = true;
                    let frame = s.frames.last_mut().unwrap();
                    // Deliberate under-approximation: evaluate under the
                    // zero-preferring model of the current pc and continue
                    // with the concrete value.
                    let e = frame.slots[*src as usize].clone();
                    let value = match solver.check(&s.pc, &s.site_widths) {
                        Ok(CheckResult::Sat(m)) => {
                            e.eval(&|ord| m.values.get(ord as usize).copied().unwrap_or(0))
                        }
                        // Unreachable for states attached to the tree;
                        // fall back to the all-zero assignment.
                        _ => e.eval(&|_| 0),
                    };
                    let ty = func.slot_tys[*dst as usize];
                    let frame = s.frames.last_mut().unwrap();
                    frame.slots[*dst as usize] = expr::cst(ty.width, value);
                }
                Instr::Call { dst, func: callee, args } => {
                    let callee_fn = p.function(*callee);
                    let arg_exprs: Vec<ExprRef> =
                        args.iter().map(|&a| frame.slots[a as usize].clone()).collect();
                    let mut slots: Vec<ExprRef> = callee_fn
                        .slot_tys
                        .iter()
                        .map(|ty| expr::cst(ty.width, 0))
                        .collect();
                    slots[..arg_exprs.len()].clone_from_slice(&arg_exprs);
                    let ret_dst = *dst;
                    s.frames.push(SymFrame {
                        func: *callee,
                        block: 0,
                        instr: 0,
                        slots,
                        ret_dst,
                    });
                }
            }
            continue;
        }

        steps += 1;
        match &block.term {
            Terminator::Jump(b) => {
                frame.block = *b;
                frame.instr = 0;
            }
            Terminator::Branch { cond, on_true, on_false } => {
                let cond = frame.slots[*cond as usize].clone();
                let fi = frame.func;
                return RunStop::Branch {
                    cond,
                    on_true: Address { function_index: fi, block_index: *on_true },
                    on_false: Address { function_index: fi, block_index: *on_false },
                    state: s,
                };
            }
            Terminator::Return(slot) => {
                let value = slot.map(|sl| frame.slots[sl as usize].clone());
                let ret_dst = frame.ret_dst;
                s.frames.pop();
                match s.frames.last_mut() {
                    None => {
                        return RunStop::Terminal(Outcome::Returned, s.site_widths.clone(), s.approx)
                    }
                    Some(caller) => {
                        if let (Some(dst), Some(v)) = (ret_dst, value) {
                            caller.slots[dst as usize] = v;
                        }
                    }
                }
            }
            Terminator::Abort => {
                return RunStop::Terminal(Outcome::Aborted, s.site_widths.clone(), s.approx)
            }
            Terminator::AssertFail => {
                return RunStop::Terminal(Outcome::AssertFailed, s.site_widths.clone(), s.approx)
            }
        }
    }
}

fn translate_binop(op: BinOp, signed: bool) -> BvBinOp {
    match op {
        BinOp::Add => BvBinOp::Add,
        BinOp::Sub => BvBinOp::Sub,
        BinOp::Mul => BvBinOp::Mul,
        BinOp::Div => {
            if signed {
                BvBinOp::SDiv
            } else {
                BvBinOp::UDiv
            }
        }
        BinOp::Rem => {
            if signed {
                BvBinOp::SRem
            } else {
                BvBinOp::URem
            }
        }
        BinOp::And => BvBinOp::BitAnd,
        BinOp::Or => BvBinOp::BitOr,
        BinOp::Xor => BvBinOp::BitXor,
        BinOp::Shl => BvBinOp::Shl,
        BinOp::Shr => {
            if signed {
                BvBinOp::AShr
            } else {
                BvBinOp::LShr
            }
        }
        BinOp::Eq => BvBinOp::Eq,
        BinOp::Ne => BvBinOp::Ne,
        BinOp::Lt => {
            if signed {
                BvBinOp::Slt
            } else {
                BvBinOp::Ult
            }
        }
        BinOp::Le => {
            if signed {
                BvBinOp::Sle
            } else {
                BvBinOp::Ule
            }
        }
        // a > b  ⇔  b < a; lowering keeps Gt/Ge, so swap operands here.
        BinOp::Gt | BinOp::Ge => unreachable!("Gt/Ge are rewritten before translation"),
    }
}

/// Compute the continuation of `s`: the feasible arms of its next branch
/// (with their successor states), or the terminal it runs into.
pub fn continuation(
    p: &IrProgram,
    s: &SymbolicState,
    solver: &SolverCtx,
    step_cap: u64,
) -> Continuation {
    match run_to_branch(p, s, solver, step_cap) {
        RunStop::Budget(site_widths) => Continuation::Budget { site_widths },
        RunStop::Terminal(outcome, site_widths, approx) => {
            Continuation::Terminal { outcome, site_widths, approx }
        }
        RunStop::Branch { state, cond, on_true, on_false } => {
            let mut arms = Vec::new();
            let mut infeasible = Vec::new();
            for (addr, oriented) in [
                (on_true, cond.clone()),
                (on_false, expr::un(BvUnOp::Not, cond.clone())),
            ] {
                let (pc, appended) = state.pc.and(oriented);
                if appended == Appended::False {
                    infeasible.push(addr);
                    continue;
                }
                let feasible = match solver.check(&pc, &state.site_widths) {
                    Ok(CheckResult::Sat(_)) => true,
                    Ok(CheckResult::Unsat) => false,
                    Err(_) => false,
                };
                if !feasible {
                    infeasible.push(addr);
                    continue;
                }
                let mut frames = state.frames.clone();
                let top = frames.last_mut().unwrap();
                top.block = addr.block_index;
                top.instr = 0;
                arms.push(Arm {
                    addr,
                    state: SymbolicState {
                        frames,
                        pc,
                        at: addr,
                        site_widths: state.site_widths.clone(),
                        approx: state.approx,
                    },
                    pc_changed: appended == Appended::Added,
                });
            }
            Continuation::Branch { arms, infeasible }
        }
    }
}

/// Extend `s` across its next branch toward `next`.
pub fn step_to(
    p: &IrProgram,
    s: &SymbolicState,
    next: Address,
    solver: &SolverCtx,
    step_cap: u64,
) -> Result<StepResult, SymexError> {
    match continuation(p, s, solver, step_cap) {
        Continuation::Budget { .. } => Ok(StepResult::Budget),
        Continuation::Terminal { .. } => Err(SymexError::MalformedTarget),
        Continuation::Branch { arms, infeasible } => {
            if let Some(arm) = arms.into_iter().find(|a| a.addr == next) {
                Ok(StepResult::Ok { state: arm.state, pc_changed: arm.pc_changed })
            } else if infeasible.contains(&next) {
                Ok(StepResult::Infeasible)
            } else {
                Err(SymexError::MalformedTarget)
            }
        }
    }
}

/// The feasible arms of the next branch, with their path conditions.
pub fn feasible_arms(
    p: &IrProgram,
    s: &SymbolicState,
    solver: &SolverCtx,
    step_cap: u64,
) -> Option<Vec<(Address, Constraint)>> {
    match continuation(p, s, solver, step_cap) {
        Continuation::Budget { .. } => None,
        Continuation::Terminal { .. } => Some(Vec::new()),
        Continuation::Branch { arms, .. } => {
            Some(arms.into_iter().map(|a| (a.addr, a.state.pc)).collect())
        }
    }
}
