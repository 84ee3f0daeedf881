//! The best-first search loop: a Monte Carlo tree search over the
//! program's observed execution paths.
//!
//! Node taxonomy:
//! - Hollow: address observed concretely, no symbolic state yet.
//! - Solid: symbolic state attached; owns exactly one Simulation child.
//! - Phantom: arm proven feasible by the solver but never yet observed
//!   concretely; simulating it samples its stored constraint directly.
//! - Redundant(TautologyDuplicate): its constraint equals its parent's,
//!   so sampling it would duplicate the parent's sampler; traversable
//!   but never simulated.
//! - Redundant(MismatchObserved): observed concretely but symbolically
//!   infeasible (the concretization intrinsic is the only source);
//!   pruned at creation — its subtree is reached only through its
//!   parent's sampler.
//! - Simulation: the sampling leaf attached to each Solid node.
//!
//! Symbolic work is lazy: a node's continuation (next branch, feasible
//! arms, successor states) is computed the first time selection
//! descends through it, never during trace expansion.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::appfuzz::{app_fuzz, InputKind, SamplerState};
use crate::concrete::{self, InputVector, Trace};
use crate::ir::{Address, IrProgram};
use crate::rng::Xorshift64Star;
use crate::solver::SolverCtx;
use crate::symex::{self, Continuation, SymbolicState};

pub const DEFAULT_CONEX_BUDGET: u64 = 100_000;

/// Capped (step- or depth-limited) traces are truncated to this many
/// addresses when inserted into the tree: their tails can never be part
/// of a full-exploration proof, and unbounded insertion would let a
/// single deep recursion flood the arena. The truncation node is marked
/// as a capped end, which blocks fully-explored propagation exactly as
/// the real end would.
const CAPPED_EXPANSION_DEPTH: usize = 1024;

/// Search hyperparameters. Defaults follow the baseline configuration:
/// exploration ratio √2, 8 cores, tree depth 10^5, one sample per
/// simulation, non-persistent.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HyperParams {
    pub rho: f64,
    pub cores: usize,
    pub tree_depth: usize,
    pub conex_budget: u64,
    pub symex_budget: u64,
    pub n_samples: usize,
    pub persistent: bool,
    pub seed: u64,
    pub sim_budget: u64,
    pub score: ScoreMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreMode {
    /// UCT: n_win/n_sel + rho·sqrt(2·ln p_sel / n_sel), ∞ when unvisited.
    Uct,
    /// Uniform random scores (baseline for the score-function ablation).
    Random,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            rho: std::f64::consts::SQRT_2,
            cores: 8,
            tree_depth: 100_000,
            conex_budget: DEFAULT_CONEX_BUDGET,
            symex_budget: symex::DEFAULT_SYMEX_BUDGET,
            n_samples: 1,
            persistent: false,
            seed: 1,
            sim_budget: 1000,
            score: ScoreMode::Uct,
        }
    }
}

/// The selection score. Unvisited nodes are +∞ so uninvestigated
/// subtrees are always prioritised; pruning is handled by the caller
/// (pruned nodes are simply not candidates).
pub fn uct_score(n_win: u64, n_sel: u64, p_sel: u64, rho: f64) -> f64 {
    if n_sel == 0 {
        return f64::INFINITY;
    }
    let exploit = n_win as f64 / n_sel as f64;
    let explore = rho * (2.0 * (p_sel as f64).ln() / n_sel as f64).sqrt();
    exploit + explore
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RedundantReason {
    TautologyDuplicate,
    MismatchObserved,
}

enum Kind {
    Hollow,
    Solid { state: SymbolicState, cont: Option<Continuation>, sim: usize },
    RedundantTaut { state: SymbolicState, cont: Option<Continuation> },
    RedundantMismatch,
    Phantom { state: SymbolicState, pc_changed: bool, sampler: Option<SamplerState> },
    Simulation { sampler: Option<SamplerState> },
}

impl Kind {
    fn name(&self) -> &'static str {
        match self {
            Kind::Hollow => "hollow",
            Kind::Solid { .. } => "solid",
            Kind::RedundantTaut { .. } => "redundant-tautology",
            Kind::RedundantMismatch => "redundant-mismatch",
            Kind::Phantom { .. } => "phantom",
            Kind::Simulation { .. } => "simulation",
        }
    }
}

struct Node {
    addr: Option<Address>,
    parent: Option<usize>,
    depth: usize,
    children: Vec<usize>,
    kind: Kind,
    n_sel: u64,
    n_win: u64,
    sticky_pruned: bool,
    pruned: bool,
    fully_explored: bool,
    /// A complete (uncapped) trace ended exactly here.
    complete_end: bool,
    /// A capped trace ended exactly here: the subtree is hidden.
    capped_end: bool,
}

/// Read-only snapshot of a node, for tests and debugging.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeInfo {
    pub addr: Option<Address>,
    pub parent: Option<usize>,
    pub depth: usize,
    pub children: Vec<usize>,
    pub kind: &'static str,
    pub n_sel: u64,
    pub n_win: u64,
    pub pruned: bool,
    pub fully_explored: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    /// The simulation budget was spent.
    BudgetSpent,
    /// The root is fully explored: every feasible path is registered.
    FullyExplored,
    /// Every selectable node is pruned and persistence is off.
    NothingSelectable,
}

/// One CSV row per iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct StatsRow {
    pub iter: u64,
    pub selected_path_len: usize,
    pub node_kind: &'static str,
    pub batch_size: usize,
    pub solver_calls: u64,
    pub new_paths: u64,
    pub total_paths: usize,
    pub branch_cov: f64,
    pub preservation_rate: f64,
    pub wall_ms: u64,
}

pub const CSV_HEADER: &str = "iter, selected_path_len, node_kind, batch_size, solver_calls, new_paths, total_paths, branch_cov, preservation_rate, wall_ms";

impl StatsRow {
    pub fn to_csv_line(&self) -> String {
        format!(
            "{}, {}, {}, {}, {}, {}, {}, {:.6}, {:.6}, {}",
            self.iter,
            self.selected_path_len,
            self.node_kind,
            self.batch_size,
            self.solver_calls,
            self.new_paths,
            self.total_paths,
            self.branch_cov,
            self.preservation_rate,
            self.wall_ms
        )
    }
}

#[derive(Debug, Clone)]
pub struct SuiteEntry {
    pub input: InputVector,
    /// Iteration at which this input first discovered its path (0 for
    /// the seed run).
    pub first_new_path_iter: u64,
}

#[derive(Debug, Clone)]
pub struct StepReport {
    pub iter: u64,
    pub selected: Vec<usize>,
    pub selected_addrs: Vec<Address>,
    pub node_kind: &'static str,
    pub batch_size: usize,
    pub new_paths: u64,
}

pub struct Engine<'p> {
    p: &'p IrProgram,
    pub hp: HyperParams,
    pub solver: SolverCtx,
    nodes: Vec<Node>,
    registry: HashSet<Vec<Address>>,
    suite: Vec<SuiteEntry>,
    rng: Xorshift64Star,
    iter: u64,
    virtual_steps: u64,
    branch_addrs: BTreeSet<Address>,
    covered: BTreeSet<Address>,
    branch_hits: BTreeMap<Address, u64>,
    mutant_total: u64,
    mutant_preserved: u64,
    mutant_new_paths: u64,
    /// Sum and count of per-simulation preservation rates (one term per
    /// iteration that produced at least one mutant).
    pres_rate_sum: f64,
    pres_rate_n: u64,
    stats: Vec<StatsRow>,
    termination: Option<Termination>,
    pool: rayon::ThreadPool,
}

impl<'p> Engine<'p> {
    pub fn new(p: &'p IrProgram, hp: HyperParams) -> Engine<'p> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(hp.cores)
            .build()
            .expect("rayon pool");
        let root_state = symex::initial_state(p);
        let mut engine = Engine {
            p,
            solver: SolverCtx::new(),
            nodes: Vec::new(),
            registry: HashSet::new(),
            suite: Vec::new(),
            rng: Xorshift64Star::new(hp.seed),
            iter: 0,
            virtual_steps: 0,
            branch_addrs: p.branch_addresses(),
            covered: BTreeSet::new(),
            branch_hits: BTreeMap::new(),
            mutant_total: 0,
            mutant_preserved: 0,
            mutant_new_paths: 0,
            pres_rate_sum: 0.0,
            pres_rate_n: 0,
            stats: Vec::new(),
            termination: None,
            pool,
            hp,
        };
        // Root: solid, state = program entry, with its simulation child.
        engine.nodes.push(Node {
            addr: None,
            parent: None,
            depth: 0,
            children: Vec::new(),
            kind: Kind::Solid { state: root_state, cont: None, sim: usize::MAX },
            n_sel: 0,
            n_win: 0,
            sticky_pruned: false,
            pruned: false,
            fully_explored: false,
            complete_end: false,
            capped_end: false,
        });
        let sim = engine.new_node(0, None, Kind::Simulation { sampler: None });
        if let Kind::Solid { sim: s, .. } = &mut engine.nodes[0].kind {
            *s = sim;
        }
        // Seed run: the dummy zero input.
        let seed_input = InputVector::seed();
        let trace = engine.execute_one(&seed_input);
        engine.integrate(&[(seed_input, InputKind::Solver, trace)], &[0]);
        engine.prune();
        engine
    }

    // --- small accessors ------------------------------------------------

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_info(&self, id: usize) -> NodeInfo {
        let n = &self.nodes[id];
        NodeInfo {
            addr: n.addr,
            parent: n.parent,
            depth: n.depth,
            children: n.children.clone(),
            kind: n.kind.name(),
            n_sel: n.n_sel,
            n_win: n.n_win,
            pruned: n.pruned,
            fully_explored: n.fully_explored,
        }
    }

    /// Address path from the root to `id` (root excluded, simulation
    /// nodes carry no address).
    pub fn addr_path(&self, id: usize) -> Vec<Address> {
        let mut out = Vec::new();
        let mut cur = Some(id);
        while let Some(c) = cur {
            if let Some(a) = self.nodes[c].addr {
                out.push(a);
            }
            cur = self.nodes[c].parent;
        }
        out.reverse();
        out
    }

    pub fn registry(&self) -> &HashSet<Vec<Address>> {
        &self.registry
    }

    pub fn suite(&self) -> &[SuiteEntry] {
        &self.suite
    }

    pub fn stats(&self) -> &[StatsRow] {
        &self.stats
    }

    pub fn termination(&self) -> Option<Termination> {
        self.termination
    }

    pub fn iterations(&self) -> u64 {
        self.iter
    }

    pub fn branch_cov(&self) -> f64 {
        if self.branch_addrs.is_empty() {
            1.0
        } else {
            self.covered.len() as f64 / self.branch_addrs.len() as f64
        }
    }

    pub fn branch_hits(&self) -> &BTreeMap<Address, u64> {
        &self.branch_hits
    }

    pub fn branches_total(&self) -> usize {
        self.branch_addrs.len()
    }

    pub fn branches_hit(&self) -> usize {
        self.covered.len()
    }

    /// Aggregate path preservation of mutation-generated inputs: the
    /// mean of the per-selected-node rates (one term per simulation that
    /// produced mutants), so every visited node weighs equally rather
    /// than every input.
    pub fn mutant_preservation(&self) -> f64 {
        if self.pres_rate_n == 0 {
            1.0
        } else {
            self.pres_rate_sum / self.pres_rate_n as f64
        }
    }

    pub fn mutant_counts(&self) -> (u64, u64) {
        (self.mutant_preserved, self.mutant_total)
    }

    /// How many registered paths were first discovered by a
    /// mutation-generated input rather than a solver model.
    pub fn mutant_new_paths(&self) -> u64 {
        self.mutant_new_paths
    }

    fn wall_ms(&self) -> u64 {
        // Deterministic virtual clock: one millisecond per thousand
        // interpreted instructions.
        self.virtual_steps / 1000
    }

    // --- node helpers ----------------------------------------------------

    fn new_node(&mut self, parent: usize, addr: Option<Address>, kind: Kind) -> usize {
        let id = self.nodes.len();
        let depth = self.nodes[parent].depth + addr.is_some() as usize;
        let sticky = matches!(kind, Kind::RedundantMismatch);
        self.nodes.push(Node {
            addr,
            parent: Some(parent),
            depth,
            children: Vec::new(),
            kind,
            n_sel: 0,
            n_win: 0,
            sticky_pruned: sticky,
            pruned: sticky,
            fully_explored: false,
            complete_end: false,
            capped_end: false,
        });
        self.nodes[parent].children.push(id);
        id
    }

    fn child_at(&self, parent: usize, addr: Address) -> Option<usize> {
        self.nodes[parent]
            .children
            .iter()
            .copied()
            .find(|&c| self.nodes[c].addr == Some(addr))
    }

    fn state_of(&self, id: usize) -> Option<&SymbolicState> {
        match &self.nodes[id].kind {
            Kind::Solid { state, .. }
            | Kind::RedundantTaut { state, .. }
            | Kind::Phantom { state, .. } => Some(state),
            _ => None,
        }
    }

    fn cont_of(&self, id: usize) -> Option<&Continuation> {
        match &self.nodes[id].kind {
            Kind::Solid { cont, .. } | Kind::RedundantTaut { cont, .. } => cont.as_ref(),
            _ => None,
        }
    }

    /// Compute and memoize the continuation of an attached node; insert
    /// Phantom children for feasible unseen arms and reclassify hollow
    /// children sitting on infeasible addresses.
    fn ensure_cont(&mut self, id: usize) {
        if self.cont_of(id).is_some() {
            return;
        }
        let state = match self.state_of(id) {
            Some(s) => s.clone(),
            None => return,
        };
        let cont = symex::continuation(self.p, &state, &self.solver, self.hp.symex_budget);
        // Store first, then adjust children.
        match &mut self.nodes[id].kind {
            Kind::Solid { cont: slot, .. } | Kind::RedundantTaut { cont: slot, .. } => {
                *slot = Some(cont.clone());
            }
            _ => unreachable!("ensure_cont on unattached node"),
        }
        if let Continuation::Branch { arms, infeasible } = &cont {
            for arm in arms {
                if self.child_at(id, arm.addr).is_none() {
                    self.new_node(
                        id,
                        Some(arm.addr),
                        Kind::Phantom {
                            state: arm.state.clone(),
                            pc_changed: arm.pc_changed,
                            sampler: None,
                        },
                    );
                }
            }
            let arm_addrs: Vec<Address> = arms.iter().map(|a| a.addr).collect();
            let infeasible = infeasible.clone();
            let hollow_children: Vec<usize> = self.nodes[id]
                .children
                .iter()
                .copied()
                .filter(|&c| matches!(self.nodes[c].kind, Kind::Hollow))
                .collect();
            for c in hollow_children {
                let caddr = self.nodes[c].addr.expect("hollow nodes carry addresses");
                if !arm_addrs.contains(&caddr) || infeasible.contains(&caddr) {
                    self.make_mismatch(c);
                }
            }
        } else {
            // Terminal or Budget: concretely observed children that the
            // symbolic execution cannot reach are mismatches (Terminal
            // case only; Budget leaves them unknown).
            if matches!(cont, Continuation::Terminal { .. }) {
                let hollow_children: Vec<usize> = self.nodes[id]
                    .children
                    .iter()
                    .copied()
                    .filter(|&c| matches!(self.nodes[c].kind, Kind::Hollow))
                    .collect();
                for c in hollow_children {
                    self.make_mismatch(c);
                }
            }
        }
    }

    fn make_mismatch(&mut self, id: usize) {
        self.nodes[id].kind = Kind::RedundantMismatch;
        self.nodes[id].sticky_pruned = true;
        self.nodes[id].pruned = true;
    }

    /// Attach a symbolic state to a node: Solid (with a fresh Simulation
    /// child) unless the defining conjunct changed nothing, which makes
    /// it a tautology duplicate.
    fn attach(&mut self, id: usize, state: SymbolicState, pc_changed: bool, sampler: Option<SamplerState>) {
        if pc_changed {
            self.nodes[id].kind = Kind::Solid { state, cont: None, sim: usize::MAX };
            let sim = self.new_node(id, None, Kind::Simulation { sampler });
            if let Kind::Solid { sim: s, .. } = &mut self.nodes[id].kind {
                *s = sim;
            }
        } else {
            self.nodes[id].kind = Kind::RedundantTaut { state, cont: None };
        }
    }

    /// Promote a hollow child of `parent` using the parent's (already
    /// computed) continuation. Returns true if the child became
    /// traversable (Solid or tautology-redundant).
    fn promote(&mut self, parent: usize, child: usize) -> bool {
        let caddr = self.nodes[child].addr.expect("promoting an addressed node");
        let (arm, infeasible) = match self.cont_of(parent) {
            Some(Continuation::Branch { arms, infeasible }) => (
                arms.iter().find(|a| a.addr == caddr).cloned(),
                infeasible.contains(&caddr),
            ),
            _ => (None, false),
        };
        match arm {
            Some(arm) => {
                self.attach(child, arm.state, arm.pc_changed, None);
                true
            }
            None => {
                let _ = infeasible;
                self.make_mismatch(child);
                false
            }
        }
    }

    // --- the four stages ---------------------------------------------------

    /// Descend from the root to a simulation or phantom node. Returns the
    /// node-id path (root inclusive), or None when nothing is selectable.
    fn select(&mut self) -> Option<Vec<usize>> {
        'restart: loop {
            // A pruned root is a real dead end even in persistent mode:
            // persistence only keeps fully-explored subtrees selectable
            // (via the pruned-flag computation), while sticky prunes mean
            // every sampler below is exhausted.
            if self.nodes[0].pruned {
                return None;
            }
            let mut path = vec![0usize];
            let mut cur = 0usize;
            loop {
                match &self.nodes[cur].kind {
                    Kind::Simulation { .. } | Kind::Phantom { .. } => return Some(path),
                    Kind::Solid { .. } | Kind::RedundantTaut { .. } => {
                        self.ensure_cont(cur);
                        // With a budget-limited continuation, settle on the
                        // nearest symbolic ancestor's sampler: this node's
                        // own simulation child if it has one.
                        if matches!(self.cont_of(cur), Some(Continuation::Budget { .. })) {
                            if let Kind::Solid { sim, .. } = self.nodes[cur].kind {
                                if !self.nodes[sim].pruned {
                                    path.push(sim);
                                    return Some(path);
                                }
                            }
                            self.dead_end(cur);
                            continue 'restart;
                        }
                        let candidates: Vec<usize> = self.nodes[cur]
                            .children
                            .iter()
                            .copied()
                            .filter(|&c| !self.nodes[c].pruned)
                            .collect();
                        if candidates.is_empty() {
                            self.dead_end(cur);
                            continue 'restart;
                        }
                        let chosen = self.pick(cur, &candidates);
                        if matches!(self.nodes[chosen].kind, Kind::Hollow) {
                            if !self.promote(cur, chosen) {
                                // Became a mismatch: rescore this node.
                                continue;
                            }
                        }
                        path.push(chosen);
                        cur = chosen;
                    }
                    Kind::Hollow | Kind::RedundantMismatch => {
                        unreachable!("descent never lands on {}", self.nodes[cur].kind.name())
                    }
                }
            }
        }
    }

    /// Argmax over scores with uniform random tie-breaking.
    fn pick(&mut self, parent: usize, candidates: &[usize]) -> usize {
        debug_assert!(!candidates.is_empty());
        let p_sel = self.nodes[parent].n_sel;
        let scores: Vec<f64> = candidates
            .iter()
            .map(|&c| match self.hp.score {
                ScoreMode::Uct => {
                    uct_score(self.nodes[c].n_win, self.nodes[c].n_sel, p_sel, self.hp.rho)
                }
                ScoreMode::Random => self.rng.unit_f64(),
            })
            .collect();
        let best = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let ties: Vec<usize> = candidates
            .iter()
            .zip(&scores)
            .filter(|(_, &s)| s == best)
            .map(|(&c, _)| c)
            .collect();
        ties[self.rng.below(ties.len())]
    }

    /// Mark a node that can lead nowhere and cascade upward.
    fn dead_end(&mut self, id: usize) {
        self.nodes[id].sticky_pruned = true;
        self.nodes[id].pruned = true;
        let mut cur = self.nodes[id].parent;
        while let Some(c) = cur {
            let all_pruned = self.nodes[c].children.iter().all(|&k| self.nodes[k].pruned);
            if all_pruned {
                self.nodes[c].sticky_pruned = true;
                self.nodes[c].pruned = true;
                cur = self.nodes[c].parent;
            } else {
                break;
            }
        }
    }

    /// Run the sampler of the selected node and execute the batch.
    /// Returns (input, kind, trace) triples.
    fn simulate(&mut self, node: usize) -> Vec<(InputVector, InputKind, Trace)> {
        // A simulation node samples its parent's path condition over the
        // full set of input sites the parent's symbolic segment reads:
        // otherwise inputs consumed between the parent's address and its
        // next branch would never be varied. The parent's continuation
        // carries exactly those widths.
        if matches!(self.nodes[node].kind, Kind::Simulation { .. }) {
            let parent = self.nodes[node].parent.expect("sim nodes have parents");
            self.ensure_cont(parent);
        }
        let (constraint, site_widths) = {
            let (owner_state, cont) = match &self.nodes[node].kind {
                Kind::Phantom { state, .. } => (state, None),
                Kind::Simulation { .. } => {
                    let parent = self.nodes[node].parent.expect("sim nodes have parents");
                    (
                        self.state_of(parent).expect("sim parents are attached"),
                        self.cont_of(parent),
                    )
                }
                _ => unreachable!("simulate on non-sampling node"),
            };
            let widths = match cont {
                Some(Continuation::Branch { arms, .. }) if !arms.is_empty() => {
                    arms[0].state.site_widths.clone()
                }
                Some(Continuation::Terminal { site_widths, .. })
                | Some(Continuation::Budget { site_widths }) => site_widths.clone(),
                _ => owner_state.site_widths.clone(),
            };
            (owner_state.pc.clone(), widths)
        };
        let sampler_slot = match &mut self.nodes[node].kind {
            Kind::Phantom { sampler, .. } | Kind::Simulation { sampler } => sampler,
            _ => unreachable!(),
        };
        if sampler_slot.is_none() {
            *sampler_slot = Some(SamplerState::new(constraint, site_widths));
        }
        let mut sampler = sampler_slot.take().expect("just installed");
        let inputs = app_fuzz(&mut sampler, &self.solver, self.hp.n_samples)
            .unwrap_or_default();
        let exhausted = sampler.exhausted();
        match &mut self.nodes[node].kind {
            Kind::Phantom { sampler: slot, .. } | Kind::Simulation { sampler: slot } => {
                *slot = Some(sampler)
            }
            _ => unreachable!(),
        }
        if exhausted {
            // No input can ever be found here again.
            self.nodes[node].sticky_pruned = true;
            self.nodes[node].pruned = true;
        }
        if inputs.is_empty() {
            return Vec::new();
        }
        let vectors: Vec<InputVector> = inputs.iter().map(|(iv, _)| iv.clone()).collect();
        let p = self.p;
        let depth_cap = self.hp.tree_depth;
        let step_cap = self.hp.conex_budget;
        let traces = self
            .pool
            .install(|| concrete::execute_batch(p, &vectors, depth_cap, step_cap));
        inputs
            .into_iter()
            .zip(traces)
            .map(|((iv, kind), tr)| (iv, kind, tr))
            .collect()
    }

    fn execute_one(&self, input: &InputVector) -> Trace {
        concrete::execute(self.p, input, self.hp.tree_depth, self.hp.conex_budget)
    }

    /// Expansion + back-propagation for a batch of traces. Returns the
    /// number of new paths.
    fn integrate(
        &mut self,
        batch: &[(InputVector, InputKind, Trace)],
        selected_path: &[usize],
    ) -> u64 {
        let mut new_paths = 0u64;
        let sel_set: HashSet<usize> = selected_path.iter().copied().collect();
        for (input, kind, trace) in batch {
            self.virtual_steps += trace.steps;
            for &a in &trace.addrs {
                self.covered.insert(a);
                *self.branch_hits.entry(a).or_insert(0) += 1;
            }
            let chain = self.expand_trace(trace);
            let is_new = self.registry.insert(trace.addrs.clone());
            if is_new {
                new_paths += 1;
                if *kind == InputKind::Mutant {
                    self.mutant_new_paths += 1;
                }
                self.suite.push(SuiteEntry {
                    input: input.clone(),
                    first_new_path_iter: self.iter,
                });
                // Reward: +1 along the trace and along the selected path,
                // shared nodes credited once.
                let mut credited: HashSet<usize> = chain.iter().copied().collect();
                credited.extend(&sel_set);
                for id in credited {
                    self.nodes[id].n_win += 1;
                }
            }
        }
        for &id in selected_path {
            self.nodes[id].n_sel += 1;
        }
        new_paths
    }

    /// Walk a trace from the root, creating hollow nodes for unseen
    /// addresses and realizing phantoms. Returns the node chain.
    fn expand_trace(&mut self, trace: &Trace) -> Vec<usize> {
        let mut chain = vec![0usize];
        let mut cur = 0usize;
        let mut complete_walk = true;
        let insert_limit = if trace.outcome.is_capped() {
            CAPPED_EXPANSION_DEPTH
        } else {
            usize::MAX
        };
        for &addr in &trace.addrs {
            if matches!(self.nodes[cur].kind, Kind::RedundantMismatch) {
                // The subtree beneath a mismatch is not modelled.
                complete_walk = false;
                break;
            }
            if self.nodes[cur].depth >= insert_limit {
                self.nodes[cur].capped_end = true;
                complete_walk = false;
                break;
            }
            let child = match self.child_at(cur, addr) {
                Some(c) => {
                    if matches!(self.nodes[c].kind, Kind::Phantom { .. }) {
                        self.realize_phantom(c);
                    }
                    c
                }
                None => {
                    let kind = self.classify_new_child(cur, addr);
                    self.new_node(cur, Some(addr), kind)
                }
            };
            chain.push(child);
            cur = child;
        }
        if complete_walk {
            if trace.outcome.is_capped() {
                self.nodes[cur].capped_end = true;
            } else {
                self.nodes[cur].complete_end = true;
            }
        }
        chain
    }

    /// A concretely observed address is hollow when the parent's
    /// continuation allows it (or is unknown), a mismatch otherwise.
    fn classify_new_child(&self, parent: usize, addr: Address) -> Kind {
        match self.cont_of(parent) {
            None => Kind::Hollow,
            Some(Continuation::Budget { .. }) => Kind::Hollow,
            Some(Continuation::Terminal { .. }) => Kind::RedundantMismatch,
            Some(Continuation::Branch { arms, .. }) => {
                if arms.iter().any(|a| a.addr == addr) {
                    Kind::Hollow
                } else {
                    Kind::RedundantMismatch
                }
            }
        }
    }

    /// A phantom's address has now been observed: replace it by a solid
    /// node, re-using its constraint-derived state and moving any live
    /// sampler onto the new simulation child.
    fn realize_phantom(&mut self, id: usize) {
        let (state, pc_changed, sampler) = match &mut self.nodes[id].kind {
            Kind::Phantom { state, pc_changed, sampler } => {
                (state.clone(), *pc_changed, sampler.take())
            }
            _ => unreachable!("realize_phantom on non-phantom"),
        };
        // An exhausted phantom sampler keeps its pruned flag only for the
        // simulation child; the realized node itself becomes traversable.
        let was_pruned = self.nodes[id].sticky_pruned;
        self.nodes[id].sticky_pruned = false;
        self.nodes[id].pruned = false;
        let exhausted = sampler.as_ref().map(|s| s.exhausted()).unwrap_or(false);
        self.attach(id, state, pc_changed, sampler);
        if let Kind::Solid { sim, .. } = self.nodes[id].kind {
            if was_pruned && exhausted {
                self.nodes[sim].sticky_pruned = true;
                self.nodes[sim].pruned = true;
            }
        }
    }

    // --- pruning --------------------------------------------------------

    /// Recompute fully-explored flags bottom-up and apply all pruning
    /// rules. Under persistent mode, fully-explored-based pruning is
    /// disabled (exhausted samplers and mismatches stay pruned).
    fn prune(&mut self) {
        let n = self.nodes.len();
        let mut fe = vec![false; n];
        for id in (0..n).rev() {
            let node = &self.nodes[id];
            fe[id] = match &node.kind {
                Kind::Simulation { .. } => true, // never blocks its parent
                Kind::Hollow | Kind::Phantom { .. } | Kind::RedundantMismatch => false,
                Kind::Solid { state, cont, .. } | Kind::RedundantTaut { state, cont } => {
                    // A concretized (under-approximate) path condition can
                    // never support a full-exploration claim.
                    if node.capped_end || node.depth >= self.hp.tree_depth || state.approx {
                        false
                    } else {
                        let children_fe = node.children.iter().all(|&c| fe[c]);
                        match cont {
                            None | Some(Continuation::Budget { .. }) => false,
                            Some(Continuation::Terminal { approx, .. }) => {
                                !approx && node.complete_end && children_fe
                            }
                            Some(Continuation::Branch { arms, .. }) => {
                                let arms_fe = arms.iter().all(|a| {
                                    self.child_at(id, a.addr).map(|c| fe[c]).unwrap_or(false)
                                });
                                arms_fe && children_fe
                            }
                        }
                    }
                }
            };
        }
        for id in 0..n {
            self.nodes[id].fully_explored = fe[id];
            let mut pruned = self.nodes[id].sticky_pruned;
            if !self.hp.persistent && fe[id] && !matches!(self.nodes[id].kind, Kind::Simulation { .. }) {
                pruned = true;
            }
            self.nodes[id].pruned = pruned;
        }
        // Useless-simulation rule: a simulation child is pruned when its
        // parent has fewer than two not-fully-explored sibling arms —
        // unless one of those open siblings has no sampler of its own
        // (a mismatch node, or a tautology duplicate on a concretized
        // path), in which case this sampler is the only way in.
        if !self.hp.persistent {
            for id in 0..n {
                let sim = match self.nodes[id].kind {
                    // Budget-limited nodes keep their sampler: it is the
                    // only handle on the unexplored region beneath them.
                    Kind::Solid { cont: Some(Continuation::Budget { .. }), .. } => continue,
                    Kind::Solid { sim, cont: Some(_), .. } => sim,
                    _ => continue,
                };
                let siblings: Vec<usize> = self.nodes[id]
                    .children
                    .iter()
                    .copied()
                    .filter(|&c| c != sim)
                    .collect();
                let not_fe = siblings.iter().filter(|&&c| !fe[c]).count();
                let open_samplerless = siblings.iter().any(|&c| {
                    !fe[c]
                        && match &self.nodes[c].kind {
                            Kind::RedundantMismatch => true,
                            Kind::RedundantTaut { state, .. } => state.approx,
                            _ => false,
                        }
                });
                if (not_fe < 2 || fe[id]) && !open_samplerless {
                    self.nodes[sim].pruned = true;
                }
            }
        }
    }

    // --- driving --------------------------------------------------------

    /// One full iteration: Selection, Simulation, Expansion,
    /// Back-propagation, pruning. Returns None once the search is over.
    pub fn step(&mut self) -> Option<StepReport> {
        if self.termination.is_some() {
            return None;
        }
        if self.iter >= self.hp.sim_budget {
            self.termination = Some(Termination::BudgetSpent);
            return None;
        }
        if self.nodes[0].fully_explored && !self.hp.persistent {
            self.termination = Some(Termination::FullyExplored);
            return None;
        }
        let path = match self.select() {
            Some(p) => p,
            None => {
                self.termination = Some(if self.nodes[0].fully_explored {
                    Termination::FullyExplored
                } else {
                    Termination::NothingSelectable
                });
                return None;
            }
        };
        self.iter += 1;
        let node = *path.last().expect("selection path is never empty");
        let node_kind = self.nodes[node].kind.name();
        let results = self.simulate(node);
        let batch_size = results.len();

        // Preservation accounting: the prefix every sampled input is
        // meant to reproduce is the address path of the sampled node.
        let prefix = self.addr_path(node);
        let mut batch_mut = (0u64, 0u64);
        for (_, kind, trace) in &results {
            if *kind == InputKind::Mutant {
                self.mutant_total += 1;
                batch_mut.1 += 1;
                if crate::appfuzz::trace_starts_with(trace, &prefix) {
                    self.mutant_preserved += 1;
                    batch_mut.0 += 1;
                }
            }
        }
        if batch_mut.1 > 0 {
            self.pres_rate_sum += batch_mut.0 as f64 / batch_mut.1 as f64;
            self.pres_rate_n += 1;
            crate::log_debug!(
                "iter {} node {:?} prefix_len {} mutants {}/{}",
                self.iter,
                self.nodes[node].parent.map(|p| self.addr_path(p)),
                prefix.len(),
                batch_mut.0,
                batch_mut.1
            );
        }

        let new_paths = self.integrate(&results, &path);
        self.prune();

        let report = StepReport {
            iter: self.iter,
            selected: path.clone(),
            selected_addrs: self.addr_path(node),
            node_kind,
            batch_size,
            new_paths,
        };
        self.stats.push(StatsRow {
            iter: self.iter,
            selected_path_len: path.len() - 1,
            node_kind,
            batch_size,
            solver_calls: self.solver.calls(),
            new_paths,
            total_paths: self.registry.len(),
            branch_cov: self.branch_cov(),
            preservation_rate: self.mutant_preservation(),
            wall_ms: self.wall_ms(),
        });
        Some(report)
    }

    /// Drive to termination.
    pub fn run_to_end(&mut self) -> Termination {
        while self.step().is_some() {}
        self.termination.expect("step() set a termination reason")
    }
}
