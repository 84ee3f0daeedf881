//! Tseitin bit-blasting of `BitVecExpr` trees onto the SAT core.
//!
//! Variable layout: variable 1 is the constant TRUE (asserted by a unit
//! clause); the input-site bits follow immediately, in site order,
//! LSB-first within each site. Because the SAT core decides the lowest
//! unassigned variable as `false` first, models prefer all-zero inputs.
//!
//! Circuit semantics match `expr::eval` exactly (total division, shifts
//! modulo width, two's-complement wrapping).

use std::collections::HashMap;

use super::sat::{Lit, Sat};
use crate::expr::{BitVecExpr, BvBinOp, BvUnOp, Constraint, ExprRef};

pub struct Blaster {
    pub sat: Sat,
    /// Per site (by ordinal): first variable of its bit group and width.
    pub site_vars: Vec<(usize, u8)>,
    /// Literal for constant true.
    tru: Lit,
    cache: HashMap<*const BitVecExpr, Vec<Lit>>,
}

impl Blaster {
    /// Allocate the fixed layout for `site_widths` and assert `c`.
    /// Returns None if the constraint is trivially contradictory at
    /// clause level (the solve call still decides the general case).
    pub fn new(c: &Constraint, site_widths: &[u8]) -> Blaster {
        let mut sat = Sat::new();
        let t = sat.new_var() as Lit;
        sat.add_clause(&[t]);
        let mut site_vars = Vec::with_capacity(site_widths.len());
        for &w in site_widths {
            let base = sat.num_vars() + 1;
            for _ in 0..w {
                sat.new_var();
            }
            site_vars.push((base, w));
        }
        let mut b = Blaster { sat, site_vars, tru: t, cache: HashMap::new() };
        for conj in &c.conjuncts {
            let bits = b.blast(conj);
            debug_assert_eq!(bits.len(), 1);
            b.sat.add_clause(&[bits[0]]);
        }
        b
    }

    /// The SAT literal for bit `bit` (LSB-first, sites concatenated in
    /// site order) of the input bit-string.
    pub fn input_bit_lit(&self, bit: u32) -> Lit {
        let mut rem = bit;
        for &(base, w) in &self.site_vars {
            if rem < w as u32 {
                return (base as u32 + rem) as Lit;
            }
            rem -= w as u32;
        }
        panic!("bit index {bit} out of range");
    }

    /// Read site values out of a SAT model.
    pub fn site_values(&self, model: &[bool]) -> Vec<u64> {
        self.site_vars
            .iter()
            .map(|&(base, w)| {
                let mut v = 0u64;
                for k in 0..w as usize {
                    if model[base + k] {
                        v |= 1 << k;
                    }
                }
                v
            })
            .collect()
    }

    fn fresh(&mut self) -> Lit {
        self.sat.new_var() as Lit
    }

    fn fls(&self) -> Lit {
        -self.tru
    }

    // --- gates -------------------------------------------------------

    fn and2(&mut self, a: Lit, b: Lit) -> Lit {
        if a == self.fls() || b == self.fls() || a == -b {
            return self.fls();
        }
        if a == self.tru || a == b {
            return b;
        }
        if b == self.tru {
            return a;
        }
        let g = self.fresh();
        self.sat.add_clause(&[-g, a]);
        self.sat.add_clause(&[-g, b]);
        self.sat.add_clause(&[g, -a, -b]);
        g
    }

    fn or2(&mut self, a: Lit, b: Lit) -> Lit {
        -self.and2(-a, -b)
    }

    fn xor2(&mut self, a: Lit, b: Lit) -> Lit {
        if a == self.tru {
            return -b;
        }
        if a == self.fls() {
            return b;
        }
        if b == self.tru {
            return -a;
        }
        if b == self.fls() {
            return a;
        }
        if a == b {
            return self.fls();
        }
        if a == -b {
            return self.tru;
        }
        let g = self.fresh();
        self.sat.add_clause(&[-a, -b, -g]);
        self.sat.add_clause(&[a, b, -g]);
        self.sat.add_clause(&[a, -b, g]);
        self.sat.add_clause(&[-a, b, g]);
        g
    }

    fn ite(&mut self, c: Lit, t: Lit, e: Lit) -> Lit {
        if c == self.tru {
            return t;
        }
        if c == self.fls() {
            return e;
        }
        if t == e {
            return t;
        }
        if t == self.tru && e == self.fls() {
            return c;
        }
        if t == self.fls() && e == self.tru {
            return -c;
        }
        let g = self.fresh();
        self.sat.add_clause(&[-c, -t, g]);
        self.sat.add_clause(&[-c, t, -g]);
        self.sat.add_clause(&[c, -e, g]);
        self.sat.add_clause(&[c, e, -g]);
        g
    }

    // --- word-level helpers (bit vectors are LSB-first Vec<Lit>) ------

    fn const_bits(&self, width: u8, value: u64) -> Vec<Lit> {
        (0..width).map(|i| if value >> i & 1 == 1 { self.tru } else { self.fls() }).collect()
    }

    fn add_with_carry(&mut self, a: &[Lit], b: &[Lit], mut carry: Lit) -> (Vec<Lit>, Lit) {
        debug_assert_eq!(a.len(), b.len());
        let mut out = Vec::with_capacity(a.len());
        for i in 0..a.len() {
            let axb = self.xor2(a[i], b[i]);
            let sum = self.xor2(axb, carry);
            let c1 = self.and2(a[i], b[i]);
            let c2 = self.and2(axb, carry);
            carry = self.or2(c1, c2);
            out.push(sum);
        }
        (out, carry)
    }

    fn add(&mut self, a: &[Lit], b: &[Lit]) -> Vec<Lit> {
        let f = self.fls();
        self.add_with_carry(a, b, f).0
    }

    fn sub(&mut self, a: &[Lit], b: &[Lit]) -> Vec<Lit> {
        let nb: Vec<Lit> = b.iter().map(|&l| -l).collect();
        let t = self.tru;
        self.add_with_carry(a, &nb, t).0
    }

    fn neg(&mut self, a: &[Lit]) -> Vec<Lit> {
        let w = a.len() as u8;
        let one = self.const_bits(w, 1);
        let na: Vec<Lit> = a.iter().map(|&l| -l).collect();
        self.add(&na, &one)
    }

    fn mul(&mut self, a: &[Lit], b: &[Lit]) -> Vec<Lit> {
        let w = a.len();
        let mut acc = self.const_bits(w as u8, 0);
        for i in 0..w {
            // Partial product: (a << i) masked by b_i.
            let mut partial = Vec::with_capacity(w);
            for j in 0..w {
                if j < i {
                    partial.push(self.fls());
                } else {
                    partial.push(self.and2(a[j - i], b[i]));
                }
            }
            acc = self.add(&acc, &partial);
        }
        acc
    }

    /// Unsigned a < b via the borrow of a - b.
    fn ult(&mut self, a: &[Lit], b: &[Lit]) -> Lit {
        let nb: Vec<Lit> = b.iter().map(|&l| -l).collect();
        let t = self.tru;
        let (_, carry) = self.add_with_carry(a, &nb, t);
        -carry
    }

    fn eq_bits(&mut self, a: &[Lit], b: &[Lit]) -> Lit {
        let mut acc = self.tru;
        for i in 0..a.len() {
            let x = self.xor2(a[i], b[i]);
            acc = self.and2(acc, -x);
        }
        acc
    }

    fn slt(&mut self, a: &[Lit], b: &[Lit]) -> Lit {
        // Flip the sign bits and compare unsigned.
        let mut fa = a.to_vec();
        let mut fb = b.to_vec();
        let last = fa.len() - 1;
        fa[last] = -fa[last];
        fb[last] = -fb[last];
        self.ult(&fa, &fb)
    }

    fn mux_bits(&mut self, c: Lit, t: &[Lit], e: &[Lit]) -> Vec<Lit> {
        t.iter().zip(e).map(|(&x, &y)| self.ite(c, x, y)).collect()
    }

    fn shift(&mut self, a: &[Lit], amount: &[Lit], kind: BvBinOp) -> Vec<Lit> {
        let w = a.len();
        let stages = w.trailing_zeros() as usize; // w ∈ {8,16,32}
        let mut cur = a.to_vec();
        for k in 0..stages {
            let s = 1usize << k;
            let ctrl = amount[k];
            let shifted: Vec<Lit> = (0..w)
                .map(|i| match kind {
                    BvBinOp::Shl => {
                        if i >= s {
                            cur[i - s]
                        } else {
                            self.fls()
                        }
                    }
                    BvBinOp::LShr => {
                        if i + s < w {
                            cur[i + s]
                        } else {
                            self.fls()
                        }
                    }
                    BvBinOp::AShr => {
                        if i + s < w {
                            cur[i + s]
                        } else {
                            cur[w - 1]
                        }
                    }
                    _ => unreachable!(),
                })
                .collect();
            cur = self.mux_bits(ctrl, &shifted, &cur);
        }
        cur
    }

    /// Restoring long division: returns (quotient, remainder), with the
    /// total-function convention q = all-ones, r = a when b = 0.
    fn udivrem(&mut self, a: &[Lit], b: &[Lit]) -> (Vec<Lit>, Vec<Lit>) {
        let w = a.len();
        // One extra bit so the shifted remainder cannot overflow.
        let mut r: Vec<Lit> = vec![self.fls(); w + 1];
        let mut bx: Vec<Lit> = b.to_vec();
        bx.push(self.fls());
        let mut q = vec![self.fls(); w];
        for i in (0..w).rev() {
            // r = (r << 1) | a_i, at width w+1.
            let mut r2 = Vec::with_capacity(w + 1);
            r2.push(a[i]);
            r2.extend_from_slice(&r[..w]);
            let lt = self.ult(&r2, &bx);
            let ge = -lt;
            let diff = self.sub(&r2, &bx);
            r = self.mux_bits(ge, &diff, &r2);
            q[i] = ge;
        }
        let r_w = r[..w].to_vec();
        // b == 0 override.
        let mut nz = self.fls();
        for &l in b {
            nz = self.or2(nz, l);
        }
        let bz = -nz;
        let ones = self.const_bits(w as u8, u64::MAX);
        let qf = self.mux_bits(bz, &ones, &q);
        let rf = self.mux_bits(bz, a, &r_w);
        (qf, rf)
    }

    fn abs(&mut self, a: &[Lit]) -> Vec<Lit> {
        let sign = a[a.len() - 1];
        let na = self.neg(a);
        self.mux_bits(sign, &na, a)
    }

    // --- expression dispatch ------------------------------------------

    fn blast(&mut self, e: &ExprRef) -> Vec<Lit> {
        let key = std::rc::Rc::as_ptr(e);
        if let Some(bits) = self.cache.get(&key) {
            return bits.clone();
        }
        let bits = self.blast_uncached(e);
        self.cache.insert(key, bits.clone());
        bits
    }

    fn blast_uncached(&mut self, e: &ExprRef) -> Vec<Lit> {
        match &**e {
            BitVecExpr::Const { width, value } => self.const_bits(*width, *value),
            BitVecExpr::Site { ordinal, width } => {
                let (base, w) = self.site_vars[*ordinal as usize];
                debug_assert_eq!(w, *width);
                (0..*width as usize).map(|k| (base + k) as Lit).collect()
            }
            BitVecExpr::Un { op, arg } => {
                let a = self.blast(arg);
                match op {
                    BvUnOp::Neg => self.neg(&a),
                    BvUnOp::BitNot => a.iter().map(|&l| -l).collect(),
                    BvUnOp::Not => vec![-a[0]],
                }
            }
            BitVecExpr::ZExt { width, arg } => {
                let mut a = self.blast(arg);
                while a.len() < *width as usize {
                    a.push(self.fls());
                }
                a
            }
            BitVecExpr::SExt { width, arg } => {
                let mut a = self.blast(arg);
                let msb = a[a.len() - 1];
                while a.len() < *width as usize {
                    a.push(msb);
                }
                a
            }
            BitVecExpr::Trunc { width, arg } => {
                let a = self.blast(arg);
                a[..*width as usize].to_vec()
            }
            BitVecExpr::Bin { op, a, b } => {
                let x = self.blast(a);
                let y = self.blast(b);
                use BvBinOp::*;
                match op {
                    Add => self.add(&x, &y),
                    Sub => self.sub(&x, &y),
                    Mul => self.mul(&x, &y),
                    UDiv => self.udivrem(&x, &y).0,
                    URem => self.udivrem(&x, &y).1,
                    SDiv => {
                        let sa = x[x.len() - 1];
                        let sb = y[y.len() - 1];
                        let qa = self.abs(&x);
                        let qb = self.abs(&y);
                        let (q, _) = self.udivrem(&qa, &qb);
                        let sgn = self.xor2(sa, sb);
                        let nq = self.neg(&q);
                        self.mux_bits(sgn, &nq, &q)
                    }
                    SRem => {
                        let sa = x[x.len() - 1];
                        let qa = self.abs(&x);
                        let qb = self.abs(&y);
                        let (_, r) = self.udivrem(&qa, &qb);
                        let nr = self.neg(&r);
                        self.mux_bits(sa, &nr, &r)
                    }
                    BitAnd => {
                        (0..x.len()).map(|i| self.and2(x[i], y[i])).collect()
                    }
                    BitOr => (0..x.len()).map(|i| self.or2(x[i], y[i])).collect(),
                    BitXor => (0..x.len()).map(|i| self.xor2(x[i], y[i])).collect(),
                    Shl | LShr | AShr => self.shift(&x, &y, *op),
                    Eq => vec![self.eq_bits(&x, &y)],
                    Ne => vec![-self.eq_bits(&x, &y)],
                    Ult => vec![self.ult(&x, &y)],
                    Ule => {
                        let gt = self.ult(&y, &x);
                        vec![-gt]
                    }
                    Slt => vec![self.slt(&x, &y)],
                    Sle => {
                        let gt = self.slt(&y, &x);
                        vec![-gt]
                    }
                    And => vec![self.and2(x[0], y[0])],
                    Or => vec![self.or2(x[0], y[0])],
                }
            }
        }
    }
}
