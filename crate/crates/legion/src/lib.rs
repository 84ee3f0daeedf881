//! Coverage-guided concolic testing engine: a Monte Carlo tree search
//! over the program's execution-path tree, paired with an approximate
//! path-preserving sampler that amortises one constraint-solver call
//! across a whole batch of inputs.

pub mod appfuzz;
pub mod cli;
pub mod concrete;
pub mod expr;
pub mod ir;
pub mod lang;
pub mod logging;
pub mod mcts;
pub mod oracle;
pub mod rng;
pub mod solver;
pub mod stats;
pub mod suite;
pub mod symex;
