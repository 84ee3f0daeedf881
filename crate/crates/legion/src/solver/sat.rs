//! A small, deterministic CDCL SAT core.
//!
//! Literals use the DIMACS convention: `+v` / `-v` for variable `v ≥ 1`.
//! The decision heuristic always picks the lowest-index unassigned
//! variable and tries `false` first, so models prefer zeros in the
//! low-numbered variables — which the bit-blaster allocates to the input
//! bits. Conflict analysis learns first-UIP clauses; unit propagation
//! uses two watched literals.

pub type Lit = i32;

pub fn lit_var(l: Lit) -> usize {
    l.unsigned_abs() as usize
}

/// Index of a literal into watch lists: 2v for +v, 2v+1 for -v.
fn widx(l: Lit) -> usize {
    lit_var(l) * 2 + (l < 0) as usize
}

pub struct Sat {
    nvars: usize,
    clauses: Vec<Vec<Lit>>,
    watches: Vec<Vec<usize>>,
    /// 0 = unassigned, 1 = true, -1 = false (indexed by variable).
    assign: Vec<i8>,
    level: Vec<u32>,
    reason: Vec<usize>, // clause index, or usize::MAX for decisions/none
    trail: Vec<Lit>,
    trail_lim: Vec<usize>,
    qhead: usize,
    /// Lowest variable that might still be unassigned (decision cursor).
    next_var_hint: usize,
    /// Preferred decision value per variable (default false, which makes
    /// models zero-preferring over the input bits).
    polarity: Vec<bool>,
    ok: bool,
}

const NO_REASON: usize = usize::MAX;

impl Sat {
    pub fn new() -> Self {
        Sat {
            nvars: 0,
            clauses: Vec::new(),
            watches: vec![Vec::new(), Vec::new()],
            assign: vec![0],
            level: vec![0],
            reason: vec![NO_REASON],
            trail: Vec::new(),
            trail_lim: Vec::new(),
            qhead: 0,
            next_var_hint: 1,
            polarity: vec![false],
            ok: true,
        }
    }

    pub fn new_var(&mut self) -> usize {
        self.nvars += 1;
        self.assign.push(0);
        self.level.push(0);
        self.reason.push(NO_REASON);
        self.watches.push(Vec::new());
        self.watches.push(Vec::new());
        self.polarity.push(false);
        self.nvars
    }

    /// Bias the decision heuristic toward a value for `var`: the solver
    /// then returns a model as close to the biased assignment as the
    /// clauses allow.
    pub fn set_polarity(&mut self, var: usize, value: bool) {
        self.polarity[var] = value;
    }

    pub fn num_vars(&self) -> usize {
        self.nvars
    }

    fn value(&self, l: Lit) -> i8 {
        let v = self.assign[lit_var(l)];
        if l < 0 {
            -v
        } else {
            v
        }
    }

    fn enqueue(&mut self, l: Lit, reason: usize) -> bool {
        match self.value(l) {
            1 => true,
            -1 => false,
            _ => {
                let v = lit_var(l);
                self.assign[v] = if l < 0 { -1 } else { 1 };
                self.level[v] = self.trail_lim.len() as u32;
                self.reason[v] = reason;
                self.trail.push(l);
                true
            }
        }
    }

    /// Add a clause. Returns false if the formula is already
    /// unsatisfiable.
    pub fn add_clause(&mut self, lits: &[Lit]) -> bool {
        if !self.ok {
            return false;
        }
        debug_assert!(self.trail_lim.is_empty(), "clauses are added at level 0");
        // Deduplicate, drop false literals, detect tautologies/satisfied.
        let mut c: Vec<Lit> = Vec::with_capacity(lits.len());
        for &l in lits {
            debug_assert!(lit_var(l) <= self.nvars, "unknown variable in clause");
            match self.value(l) {
                1 => return true,
                -1 => continue,
                _ => {}
            }
            if c.contains(&-l) {
                return true;
            }
            if !c.contains(&l) {
                c.push(l);
            }
        }
        match c.len() {
            0 => {
                self.ok = false;
                false
            }
            1 => {
                if !self.enqueue(c[0], NO_REASON) {
                    self.ok = false;
                    return false;
                }
                if self.propagate().is_some() {
                    self.ok = false;
                    return false;
                }
                true
            }
            _ => {
                let ci = self.clauses.len();
                self.watches[widx(c[0])].push(ci);
                self.watches[widx(c[1])].push(ci);
                self.clauses.push(c);
                true
            }
        }
    }

    /// Unit propagation; returns the index of a conflicting clause.
    fn propagate(&mut self) -> Option<usize> {
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            let falsified = -p;
            let mut ws = std::mem::take(&mut self.watches[widx(falsified)]);
            let mut keep = 0;
            let mut conflict = None;
            'outer: for wi in 0..ws.len() {
                let ci = ws[wi];
                let clause = &mut self.clauses[ci];
                // Normalize: watched literals at positions 0 and 1.
                if clause[0] == falsified {
                    clause.swap(0, 1);
                }
                debug_assert_eq!(clause[1], falsified);
                if self.assign[lit_var(clause[0])] != 0
                    && (if clause[0] < 0 { -self.assign[lit_var(clause[0])] } else { self.assign[lit_var(clause[0])] }) == 1
                {
                    // Clause already satisfied by the other watch.
                    ws[keep] = ci;
                    keep += 1;
                    continue;
                }
                for k in 2..clause.len() {
                    let l = clause[k];
                    let val = {
                        let v = self.assign[lit_var(l)];
                        if l < 0 {
                            -v
                        } else {
                            v
                        }
                    };
                    if val != -1 {
                        clause.swap(1, k);
                        let lit = clause[1];
                        self.watches[widx(lit)].push(ci);
                        continue 'outer;
                    }
                }
                // No new watch: clause is unit or conflicting.
                ws[keep] = ci;
                keep += 1;
                let first = clause[0];
                if !self.enqueue(first, ci) {
                    conflict = Some(ci);
                    // Keep remaining watchers.
                    for j in wi + 1..ws.len() {
                        let rest = ws[j];
                        ws[keep] = rest;
                        keep += 1;
                    }
                    break;
                }
            }
            ws.truncate(keep);
            let slot = &mut self.watches[widx(falsified)];
            // Watchers added for other literals during the loop never land
            // back in this (taken) list, so a plain put-back is safe.
            ws.extend(slot.drain(..));
            *slot = ws;
            if let Some(ci) = conflict {
                self.qhead = self.trail.len();
                return Some(ci);
            }
        }
        None
    }

    /// First-UIP conflict analysis. Returns (learned clause, backjump level).
    fn analyze(&mut self, mut conflict: usize) -> (Vec<Lit>, u32) {
        let cur_level = self.trail_lim.len() as u32;
        let mut seen = vec![false; self.nvars + 1];
        let mut learned: Vec<Lit> = vec![0]; // slot 0 = asserting literal
        let mut counter = 0usize;
        let mut p: Option<Lit> = None;
        let mut trail_idx = self.trail.len();

        loop {
            let clause = &self.clauses[conflict];
            let start = if p.is_some() { 1 } else { 0 };
            for &q in &clause[start..] {
                let v = lit_var(q);
                if !seen[v] && self.level[v] > 0 {
                    seen[v] = true;
                    if self.level[v] == cur_level {
                        counter += 1;
                    } else {
                        learned.push(q);
                    }
                }
            }
            // Walk the trail backwards to the next marked literal.
            loop {
                trail_idx -= 1;
                if seen[lit_var(self.trail[trail_idx])] {
                    break;
                }
            }
            let lit = self.trail[trail_idx];
            let v = lit_var(lit);
            seen[v] = false;
            counter -= 1;
            if counter == 0 {
                learned[0] = -lit;
                break;
            }
            p = Some(lit);
            conflict = self.reason[v];
            debug_assert_ne!(conflict, NO_REASON);
            // The clause's first literal is the one it propagated.
            debug_assert_eq!(self.clauses[conflict][0], lit);
        }

        let backjump = learned[1..]
            .iter()
            .map(|&l| self.level[lit_var(l)])
            .max()
            .unwrap_or(0);
        // Move a literal of the backjump level into watch position 1.
        if learned.len() > 1 {
            let mut best = 1;
            for k in 2..learned.len() {
                if self.level[lit_var(learned[k])] > self.level[lit_var(learned[best])] {
                    best = k;
                }
            }
            learned.swap(1, best);
        }
        (learned, backjump)
    }

    fn cancel_until(&mut self, level: u32) {
        while self.trail_lim.len() as u32 > level {
            let lim = self.trail_lim.pop().unwrap();
            for &l in &self.trail[lim..] {
                let v = lit_var(l);
                self.assign[v] = 0;
                self.reason[v] = NO_REASON;
                if v < self.next_var_hint {
                    self.next_var_hint = v;
                }
            }
            self.trail.truncate(lim);
        }
        self.qhead = self.trail.len();
    }

    /// Decide SAT/UNSAT; on SAT the returned vector maps variable index
    /// to its value (index 0 unused).
    pub fn solve(&mut self) -> Option<Vec<bool>> {
        if !self.ok {
            return None;
        }
        loop {
            if let Some(conflict) = self.propagate() {
                if self.trail_lim.is_empty() {
                    self.ok = false;
                    return None;
                }
                let (learned, backjump) = self.analyze(conflict);
                self.cancel_until(backjump);
                if learned.len() == 1 {
                    let ok = self.enqueue(learned[0], NO_REASON);
                    debug_assert!(ok);
                } else {
                    let ci = self.clauses.len();
                    self.watches[widx(learned[0])].push(ci);
                    self.watches[widx(learned[1])].push(ci);
                    let asserting = learned[0];
                    self.clauses.push(learned);
                    let ok = self.enqueue(asserting, ci);
                    debug_assert!(ok);
                }
            } else {
                // Decide: lowest unassigned variable, preferred value
                // first (false unless biased).
                let mut v = self.next_var_hint;
                while v <= self.nvars && self.assign[v] != 0 {
                    v += 1;
                }
                self.next_var_hint = v;
                if v > self.nvars {
                    return Some(
                        (0..=self.nvars).map(|i| self.assign[i] == 1).collect(),
                    );
                }
                self.trail_lim.push(self.trail.len());
                let lit = if self.polarity[v] { v as Lit } else { -(v as Lit) };
                let ok = self.enqueue(lit, NO_REASON);
                debug_assert!(ok);
            }
        }
    }
}

impl Default for Sat {
    fn default() -> Self {
        Self::new()
    }
}
