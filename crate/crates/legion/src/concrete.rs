//! Concrete interpreter: runs an `IrProgram` on a flat little-endian byte
//! stream and records the trace of conditional-jump target addresses.
//!
//! All failures are encoded in the trace outcome; `execute` never panics
//! on well-formed IR. Wall-clock limits are modelled as deterministic
//! caps: `depth_cap` bounds the trace length, `step_cap` bounds the
//! number of executed instructions/terminators.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ir::{Address, BinOp, Instr, IrProgram, Slot, Terminator, Ty, UnOp};

/// One concrete test input: a finite byte stream. Reads past the end
/// behave as if the stream were extended with zeros.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct InputVector {
    pub bytes: Vec<u8>,
}

impl InputVector {
    pub fn new(bytes: Vec<u8>) -> Self {
        InputVector { bytes }
    }

    /// The seed input: a single zero byte.
    pub fn seed() -> Self {
        InputVector { bytes: vec![0] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Returned,
    Aborted,
    AssertFailed,
    RuntimeError,
    DepthCapped,
    StepCapped,
}

impl Outcome {
    /// A capped trace is a truncated observation, not a complete path.
    pub fn is_capped(&self) -> bool {
        matches!(self, Outcome::DepthCapped | Outcome::StepCapped)
    }
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Outcome::Returned => "returned",
            Outcome::Aborted => "aborted",
            Outcome::AssertFailed => "assert-failed",
            Outcome::RuntimeError => "runtime-error",
            Outcome::DepthCapped => "depth-capped",
            Outcome::StepCapped => "step-capped",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    /// Branch target addresses, in execution order.
    pub addrs: Vec<Address>,
    pub outcome: Outcome,
    /// Instructions plus terminators executed; the deterministic clock.
    pub steps: u64,
}

struct Frame {
    func: u32,
    block: u32,
    instr: usize,
    slots: Vec<u64>,
    ret_dst: Option<Slot>,
}

/// Execute `p` on `input`. Deterministic: identical arguments produce an
/// identical trace.
pub fn execute(p: &IrProgram, input: &InputVector, depth_cap: usize, step_cap: u64) -> Trace {
    debug_assert!(depth_cap >= 1 && step_cap >= 1);
    let mut addrs = Vec::new();
    let mut steps: u64 = 0;
    let mut cursor = 0usize; // byte offset into the input stream

    let entry = p.function(p.entry_function);
    let mut stack = vec![Frame {
        func: p.entry_function,
        block: 0,
        instr: 0,
        slots: vec![0; entry.slot_tys.len()],
        ret_dst: None,
    }];

    let finish = |addrs: Vec<Address>, outcome: Outcome, steps: u64| Trace { addrs, outcome, steps };

    loop {
        if steps >= step_cap {
            return finish(addrs, Outcome::StepCapped, steps);
        }
        let frame = stack.last_mut().expect("frame stack never empty");
        let func = p.function(frame.func);
        let block = &func.blocks[frame.block as usize];

        if frame.instr < block.instrs.len() {
            let instr = &block.instrs[frame.instr];
            frame.instr += 1;
            steps += 1;
            match instr {
                Instr::Const { dst, value } => frame.slots[*dst as usize] = *value,
                Instr::Copy { dst, src } => frame.slots[*dst as usize] = frame.slots[*src as usize],
                Instr::Un { op, dst, src } => {
                    let ty = func.slot_tys[*dst as usize];
                    let v = frame.slots[*src as usize];
                    frame.slots[*dst as usize] = match op {
                        UnOp::Neg => ty.mask(v.wrapping_neg()),
                        UnOp::BitNot => ty.mask(!v),
                    };
                }
                Instr::Bin { op, dst, a, b } => {
                    let ty = func.slot_tys[*a as usize];
                    let x = frame.slots[*a as usize];
                    let y = frame.slots[*b as usize];
                    match eval_bin(*op, ty, x, y) {
                        Some(v) => frame.slots[*dst as usize] = v,
                        None => return finish(addrs, Outcome::RuntimeError, steps),
                    }
                }
                Instr::Cast { dst, src } => {
                    let src_ty = func.slot_tys[*src as usize];
                    let dst_ty = func.slot_tys[*dst as usize];
                    let v = frame.slots[*src as usize];
                    let wide =
                        if src_ty.signed { src_ty.to_signed(v) as u64 } else { src_ty.mask(v) };
                    frame.slots[*dst as usize] = dst_ty.mask(wide);
                }
                Instr::Input { dst, width, .. } => {
                    let n = (*width / 8) as usize;
                    let mut v: u64 = 0;
                    for k in 0..n {
                        let byte = input.bytes.get(cursor + k).copied().unwrap_or(0);
                        v |= (byte as u64) << (8 * k);
                    }
                    cursor += n;
                    frame.slots[*dst as usize] = v;
                }
                Instr::ChooseConcrete { dst, src } => {
                    frame.slots[*dst as usize] = frame.slots[*src as usize];
                }
                Instr::Call { dst, func: callee, args } => {
                    let callee_fn = p.function(*callee);
                    let mut slots = vec![0u64; callee_fn.slot_tys.len()];
                    for (i, &a) in args.iter().enumerate() {
                        slots[i] = frame.slots[a as usize];
                    }
                    stack.push(Frame {
                        func: *callee,
                        block: 0,
                        instr: 0,
                        slots,
                        ret_dst: *dst,
                    });
                }
            }
            continue;
        }

        // Terminator.
        steps += 1;
        match &block.term {
            Terminator::Jump(b) => {
                frame.block = *b;
                frame.instr = 0;
            }
            Terminator::Branch { cond, on_true, on_false } => {
                let target = if frame.slots[*cond as usize] != 0 { *on_true } else { *on_false };
                if addrs.len() >= depth_cap {
                    return finish(addrs, Outcome::DepthCapped, steps);
                }
                addrs.push(Address { function_index: frame.func, block_index: target });
                frame.block = target;
                frame.instr = 0;
            }
            Terminator::Return(slot) => {
                let value = slot.map(|s| frame.slots[s as usize]);
                let ret_dst = frame.ret_dst;
                stack.pop();
                match stack.last_mut() {
                    None => return finish(addrs, Outcome::Returned, steps),
                    Some(caller) => {
                        if let (Some(dst), Some(v)) = (ret_dst, value) {
                            caller.slots[dst as usize] = v;
                        }
                    }
                }
            }
            Terminator::Abort => return finish(addrs, Outcome::Aborted, steps),
            Terminator::AssertFail => return finish(addrs, Outcome::AssertFailed, steps),
        }
    }
}

/// Wrapping two's-complement binary evaluation at type `ty`; `None`
/// signals division/remainder by zero. Comparisons yield 0/1.
pub fn eval_bin(op: BinOp, ty: Ty, x: u64, y: u64) -> Option<u64> {
    let m = |v: u64| ty.mask(v);
    Some(match op {
        BinOp::Add => m(x.wrapping_add(y)),
        BinOp::Sub => m(x.wrapping_sub(y)),
        BinOp::Mul => m(x.wrapping_mul(y)),
        BinOp::Div => {
            if y == 0 {
                return None;
            }
            if ty.signed {
                let a = ty.to_signed(x);
                let b = ty.to_signed(y);
                m(a.wrapping_div(b) as u64)
            } else {
                m(x / y)
            }
        }
        BinOp::Rem => {
            if y == 0 {
                return None;
            }
            if ty.signed {
                let a = ty.to_signed(x);
                let b = ty.to_signed(y);
                m(a.wrapping_rem(b) as u64)
            } else {
                m(x % y)
            }
        }
        BinOp::And => m(x & y),
        BinOp::Or => m(x | y),
        BinOp::Xor => m(x ^ y),
        BinOp::Shl => m(x << (y % ty.width as u64)),
        BinOp::Shr => {
            let sh = (y % ty.width as u64) as u32;
            if ty.signed {
                m((ty.to_signed(x) >> sh) as u64)
            } else {
                m(x >> sh)
            }
        }
        BinOp::Eq => (x == y) as u64,
        BinOp::Ne => (x != y) as u64,
        BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
            let r = if ty.signed {
                let (a, b) = (ty.to_signed(x), ty.to_signed(y));
                match op {
                    BinOp::Lt => a < b,
                    BinOp::Le => a <= b,
                    BinOp::Gt => a > b,
                    _ => a >= b,
                }
            } else {
                match op {
                    BinOp::Lt => x < y,
                    BinOp::Le => x <= y,
                    BinOp::Gt => x > y,
                    _ => x >= y,
                }
            };
            r as u64
        }
    })
}

/// Execute many inputs, preserving order. Fans out on the current rayon
/// pool; results are identical to a sequential map.
pub fn execute_batch(
    p: &IrProgram,
    inputs: &[InputVector],
    depth_cap: usize,
    step_cap: u64,
) -> Vec<Trace> {
    inputs.par_iter().map(|iv| execute(p, iv, depth_cap, step_cap)).collect()
}
