//! Basic-block IR with addressed conditional-jump targets.
//!
//! Every conditional from the source language lowers to exactly one
//! `Branch` terminator; the two branch targets are the only addresses
//! that ever appear in execution traces.

use std::collections::BTreeSet;
use std::fmt;

/// Width/signedness of a value slot. Width 1 is the boolean result of a
/// comparison; it never appears as a user-visible variable type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Ty {
    pub width: u8,
    pub signed: bool,
}

impl Ty {
    pub const B1: Ty = Ty { width: 1, signed: false };

    pub fn unsigned(width: u8) -> Ty {
        Ty { width, signed: false }
    }

    /// Mask a raw value to this type's width.
    pub fn mask(&self, v: u64) -> u64 {
        if self.width >= 64 {
            v
        } else {
            v & ((1u64 << self.width) - 1)
        }
    }

    /// Sign-extend a masked value of this type to i64.
    pub fn to_signed(&self, v: u64) -> i64 {
        let shift = 64 - self.width as u32;
        ((self.mask(v) << shift) as i64) >> shift
    }
}

impl fmt::Display for Ty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", if self.signed { 'i' } else { 'u' }, self.width)
    }
}

/// Identity of a basic block; the node identity of the search tree.
/// Ordered lexicographically and stable across runs for identical source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Address {
    pub function_index: u32,
    pub block_index: u32,
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "f{}.b{}", self.function_index, self.block_index)
    }
}

/// Index of a value slot in the current frame.
pub type Slot = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Neg,
    BitNot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    And,
    Or,
    Xor,
    Shl,
    Shr,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl BinOp {
    pub fn is_comparison(&self) -> bool {
        matches!(self, BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge)
    }
}

#[derive(Debug, Clone)]
pub enum Instr {
    Const { dst: Slot, value: u64 },
    Copy { dst: Slot, src: Slot },
    Un { op: UnOp, dst: Slot, src: Slot },
    Bin { op: BinOp, dst: Slot, a: Slot, b: Slot },
    /// Width conversion; semantics depend on the slot types (zext/sext/trunc).
    Cast { dst: Slot, src: Slot },
    /// Read the next `width` bits from the input stream.
    Input { dst: Slot, width: u8, site: u32 },
    /// Concrete executor evaluates `src` normally; the symbolic executor
    /// concretizes it (a controlled source of symbolic/concrete mismatch).
    ChooseConcrete { dst: Slot, src: Slot },
    Call { dst: Option<Slot>, func: u32, args: Vec<Slot> },
}

#[derive(Debug, Clone)]
pub enum Terminator {
    Jump(u32),
    Branch { cond: Slot, on_true: u32, on_false: u32 },
    Return(Option<Slot>),
    Abort,
    AssertFail,
}

impl fmt::Display for Terminator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Terminator::Jump(b) => write!(f, "jump b{b}"),
            Terminator::Branch { cond, on_true, on_false } => {
                write!(f, "branch s{cond} ? b{on_true} : b{on_false}")
            }
            Terminator::Return(Some(s)) => write!(f, "return s{s}"),
            Terminator::Return(None) => write!(f, "return"),
            Terminator::Abort => write!(f, "abort"),
            Terminator::AssertFail => write!(f, "assert-fail"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Block {
    pub instrs: Vec<Instr>,
    pub term: Terminator,
}

#[derive(Debug, Clone)]
pub struct Function {
    pub name: String,
    pub n_params: u32,
    pub slot_tys: Vec<Ty>,
    pub blocks: Vec<Block>,
    pub ret: Option<Ty>,
}

#[derive(Debug, Clone)]
pub struct IrProgram {
    pub functions: Vec<Function>,
    /// Index of `main`.
    pub entry_function: u32,
    /// Bit-widths of the static `input` sites, in lowering order. The order
    /// of dynamic reads is runtime-determined.
    pub input_widths: Vec<u8>,
}

impl IrProgram {
    pub fn entry(&self) -> Address {
        Address { function_index: self.entry_function, block_index: 0 }
    }

    pub fn function(&self, idx: u32) -> &Function {
        &self.functions[idx as usize]
    }

    pub fn block(&self, addr: Address) -> &Block {
        &self.functions[addr.function_index as usize].blocks[addr.block_index as usize]
    }

    /// All `Branch` target addresses (both arms), each once, ordered.
    pub fn branch_addresses(&self) -> BTreeSet<Address> {
        let mut out = BTreeSet::new();
        for (fi, func) in self.functions.iter().enumerate() {
            for block in &func.blocks {
                if let Terminator::Branch { on_true, on_false, .. } = block.term {
                    out.insert(Address { function_index: fi as u32, block_index: on_true });
                    out.insert(Address { function_index: fi as u32, block_index: on_false });
                }
            }
        }
        out
    }

    pub fn branch_count(&self) -> usize {
        self.functions
            .iter()
            .flat_map(|f| &f.blocks)
            .filter(|b| matches!(b.term, Terminator::Branch { .. }))
            .count()
    }

    /// Upper bound on the bits consumed when every static input site
    /// executes once.
    pub fn total_input_bits(&self) -> u32 {
        self.input_widths.iter().map(|&w| w as u32).sum()
    }

    /// One block per line: `f<i>.b<j>: <terminator>`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (fi, func) in self.functions.iter().enumerate() {
            for (bi, block) in func.blocks.iter().enumerate() {
                out.push_str(&format!("f{fi}.b{bi}: {}\n", block.term));
            }
        }
        out
    }
}
