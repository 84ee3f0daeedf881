//! Command-line surface shared by the `legion`, `solver-cli` and
//! `sampler-cli` binaries. Exit codes: 0 on success, 1 on program or
//! input parse failure, 2 on bad flags (clap's default).

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::appfuzz::SamplerState;
use crate::expr::parse_constraint_file;
use crate::ir::{Address, IrProgram};
use crate::lang::{self, SourceProgram};
use crate::mcts::{Engine, HyperParams, ScoreMode};
use crate::oracle::oracle_paths;
use crate::solver::SolverCtx;
use crate::stats::paired_t_test;
use crate::{log_info, suite, symex};

#[derive(Parser, Debug)]
#[command(name = "legion", about = "Best-first concolic testing for .mini programs")]
pub struct Cli {
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Subcommand, Debug)]
pub enum Cmd {
    /// Search a program for paths and emit a test suite.
    Run(RunArgs),
    /// Re-execute an emitted test suite and re-measure coverage.
    Replay { dir: PathBuf, program: PathBuf },
    /// Brute-force enumerate all paths of a small program.
    Oracle {
        program: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        tree_depth: usize,
        #[arg(long, default_value_t = crate::mcts::DEFAULT_CONEX_BUDGET)]
        conex_budget: u64,
    },
    /// Hyperparameter sensitivity matrix: vary one knob per row against
    /// the baseline, reporting mean coverage and a paired two-tailed
    /// t-test p-value.
    Sensitivity(SensitivityArgs),
    /// Sample inputs for a constraint file (same engine as sampler-cli).
    Sampler(SamplerArgs),
}

#[derive(Args, Debug)]
pub struct HpArgs {
    #[arg(long, default_value_t = std::f64::consts::SQRT_2)]
    pub rho: f64,
    #[arg(long, default_value_t = 8)]
    pub cores: usize,
    #[arg(long, default_value_t = 100_000)]
    pub tree_depth: usize,
    #[arg(long, default_value_t = crate::mcts::DEFAULT_CONEX_BUDGET)]
    pub conex_budget: u64,
    #[arg(long, default_value_t = symex::DEFAULT_SYMEX_BUDGET)]
    pub symex_budget: u64,
    #[arg(long, default_value_t = 1)]
    pub n_samples: usize,
    #[arg(long, default_value_t = false)]
    pub persistent: bool,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 1000)]
    pub sim_budget: u64,
    /// Selection score: "uct" or "random".
    #[arg(long, default_value = "uct")]
    pub score: String,
}

impl HpArgs {
    pub fn to_hp(&self) -> Result<HyperParams, String> {
        let score = match self.score.as_str() {
            "uct" => ScoreMode::Uct,
            "random" => ScoreMode::Random,
            other => return Err(format!("unknown score mode `{other}` (use uct|random)")),
        };
        Ok(HyperParams {
            rho: self.rho,
            cores: self.cores,
            tree_depth: self.tree_depth,
            conex_budget: self.conex_budget,
            symex_budget: self.symex_budget,
            n_samples: self.n_samples,
            persistent: self.persistent,
            seed: self.seed,
            sim_budget: self.sim_budget,
            score,
        })
    }
}

#[derive(Args, Debug)]
pub struct RunArgs {
    pub program: PathBuf,
    #[command(flatten)]
    pub hp: HpArgs,
    /// Outer wall-clock guard; the search stops early when exceeded.
    #[arg(long)]
    pub max_seconds: Option<u64>,
    /// Output directory for suite.json, test_<seq>.bin, report.json, stats.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print the lowered IR, one block per line, and exit.
    #[arg(long, default_value_t = false)]
    pub dump_ir: bool,
    /// Print the path condition of a branch-address path
    /// (comma-separated, e.g. "f0.b1,f0.b3") and exit.
    #[arg(long)]
    pub dump_pc: Option<String>,
}

#[derive(Args, Debug)]
pub struct SensitivityArgs {
    /// Benchmark programs (≥ 2).
    #[arg(required = true)]
    pub programs: Vec<PathBuf>,
    #[arg(long, default_value_t = 2)]
    pub seeds: u64,
    #[arg(long, default_value_t = 200)]
    pub sim_budget: u64,
}

#[derive(Args, Debug)]
pub struct SamplerArgs {
    pub constraint_file: PathBuf,
    /// Minimum number of inputs to emit.
    #[arg(long, default_value_t = 8)]
    pub n: usize,
    /// Accepted for interface symmetry; the sampler itself is
    /// deterministic.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn load_program(path: &Path) -> Result<(SourceProgram, IrProgram), String> {
    let source = SourceProgram::from_file(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let ast = lang::parse(&source).map_err(|e| format!("{}: {e}", path.display()))?;
    let p = lang::lower(&ast).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok((source, p))
}

pub fn parse_addr(s: &str) -> Result<Address, String> {
    let s = s.trim();
    let rest = s.strip_prefix('f').ok_or_else(|| format!("bad address `{s}`"))?;
    let (fi, bj) = rest.split_once(".b").ok_or_else(|| format!("bad address `{s}`"))?;
    Ok(Address {
        function_index: fi.parse().map_err(|_| format!("bad address `{s}`"))?,
        block_index: bj.parse().map_err(|_| format!("bad address `{s}`"))?,
    })
}

/// Walk the symbolic execution along the given branch-address path and
/// return the resulting path condition in constraint text form.
pub fn dump_pc(p: &IrProgram, path_text: &str) -> Result<String, String> {
    let addrs: Vec<Address> = if path_text.trim().is_empty() {
        Vec::new()
    } else {
        path_text.split(',').map(parse_addr).collect::<Result<_, _>>()?
    };
    let solver = SolverCtx::new();
    let mut state = symex::initial_state(p);
    for addr in addrs {
        match symex::continuation(p, &state, &solver, symex::DEFAULT_SYMEX_BUDGET) {
            symex::Continuation::Branch { arms, .. } => {
                match arms.into_iter().find(|a| a.addr == addr) {
                    Some(arm) => state = arm.state,
                    None => return Err(format!("address {addr} is not a feasible arm here")),
                }
            }
            symex::Continuation::Terminal { outcome, .. } => {
                return Err(format!("execution already ended ({outcome}) before {addr}"))
            }
            symex::Continuation::Budget { .. } => {
                return Err(format!("symbolic budget exhausted before {addr}"))
            }
        }
    }
    Ok(state.pc.to_text(&state.site_widths))
}

pub fn cmd_run(args: &RunArgs) -> Result<(), String> {
    let (source, p) = load_program(&args.program)?;
    if args.dump_ir {
        print!("{}", p.dump());
        return Ok(());
    }
    if let Some(path_text) = &args.dump_pc {
        println!("{}", dump_pc(&p, path_text)?);
        return Ok(());
    }
    let hp = args.hp.to_hp()?;
    let mut engine = Engine::new(&p, hp);
    let deadline = args
        .max_seconds
        .map(|s| std::time::Instant::now() + std::time::Duration::from_secs(s));
    loop {
        if let Some(d) = deadline {
            if std::time::Instant::now() >= d {
                break;
            }
        }
        match engine.step() {
            Some(r) => {
                log_info!(
                    "iter {} kind={} batch={} new={} paths={} cov={:.4}",
                    r.iter,
                    r.node_kind,
                    r.batch_size,
                    r.new_paths,
                    engine.registry().len(),
                    engine.branch_cov()
                );
            }
            None => break,
        }
    }
    let report = suite::coverage_report(&engine);
    if let Some(out) = &args.out {
        suite::write_suite(out, &source.text, &engine)
            .map_err(|e| format!("cannot write {}: {e}", out.display()))?;
    }
    println!(
        "paths={} branches={}/{} branch_cov={:.6} iterations={} termination={:?} \
         preservation={:.4} mutant_paths={}",
        report.paths_found,
        report.branches_hit,
        report.branches_total,
        report.branch_cov,
        engine.iterations(),
        engine.termination(),
        engine.mutant_preservation(),
        engine.mutant_new_paths()
    );
    Ok(())
}

pub fn cmd_replay(dir: &Path, program: &Path) -> Result<(), String> {
    let (source, p) = load_program(program)?;
    let manifest = suite::load_manifest(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    if manifest.program_hash != suite::program_hash(&source.text) {
        return Err("program text does not match the recorded hash".into());
    }
    let report = suite::replay(dir, &p).map_err(|e| format!("{}: {e}", dir.display()))?;
    println!(
        "paths={} branches={}/{} branch_cov={:.6}",
        report.paths_found, report.branches_hit, report.branches_total, report.branch_cov
    );
    Ok(())
}

pub fn cmd_oracle(program: &Path, tree_depth: usize, conex_budget: u64) -> Result<(), String> {
    let (_, p) = load_program(program)?;
    let o = oracle_paths(&p, tree_depth, conex_budget).map_err(|e| e.to_string())?;
    let mut paths: Vec<&Vec<Address>> = o.paths.iter().collect();
    paths.sort();
    for path in paths {
        let addrs: Vec<String> = path.iter().map(|a| a.to_string()).collect();
        println!("{} x{}", if addrs.is_empty() { "<empty>".into() } else { addrs.join(",") },
            o.multiplicity[path]);
    }
    println!("total_paths={}", o.paths.len());
    Ok(())
}

/// Run a (setting × benchmark × seed) matrix; each non-baseline row is
/// compared to the baseline by a paired two-tailed t-test over the
/// (benchmark, seed) coverage pairs.
pub fn cmd_sensitivity(args: &SensitivityArgs) -> Result<(), String> {
    if args.programs.len() < 2 {
        return Err("sensitivity needs at least 2 benchmark programs".into());
    }
    if args.seeds < 2 {
        return Err("sensitivity needs at least 2 seeds".into());
    }
    let programs: Vec<(String, IrProgram)> = args
        .programs
        .iter()
        .map(|path| load_program(path).map(|(_, p)| (path.display().to_string(), p)))
        .collect::<Result<_, _>>()?;

    let base = HyperParams { sim_budget: args.sim_budget, ..HyperParams::default() };
    let settings: Vec<(&str, HyperParams)> = vec![
        ("baseline", base.clone()),
        ("rho=0", HyperParams { rho: 0.0, ..base.clone() }),
        ("rho=0.0025", HyperParams { rho: 0.0025, ..base.clone() }),
        ("n_samples=4", HyperParams { n_samples: 4, ..base.clone() }),
        ("persistent=on", HyperParams { persistent: true, ..base.clone() }),
        ("score=random", HyperParams { score: ScoreMode::Random, ..base.clone() }),
    ];

    let mut coverages: Vec<Vec<f64>> = Vec::new();
    for (_, hp) in &settings {
        let mut cell = Vec::new();
        for (_, p) in &programs {
            for seed in 1..=args.seeds {
                let mut engine = Engine::new(p, HyperParams { seed, ..hp.clone() });
                engine.run_to_end();
                cell.push(engine.branch_cov());
            }
        }
        coverages.push(cell);
    }

    println!("setting, mean_coverage, p_value_vs_baseline");
    for (i, (name, _)) in settings.iter().enumerate() {
        let mean = coverages[i].iter().sum::<f64>() / coverages[i].len() as f64;
        let p = if i == 0 { 1.0 } else { paired_t_test(&coverages[i], &coverages[0]).1 };
        println!("{name}, {mean:.6}, {p:.6}");
    }
    Ok(())
}

pub fn cmd_sampler(args: &SamplerArgs) -> Result<(), String> {
    let text = std::fs::read_to_string(&args.constraint_file)
        .map_err(|e| format!("cannot read {}: {e}", args.constraint_file.display()))?;
    let (site_widths, constraint) = parse_constraint_file(&text).map_err(|e| e.to_string())?;
    let solver = SolverCtx::new();
    let mut st = SamplerState::new(constraint, site_widths);
    let inputs = crate::appfuzz::app_fuzz(&mut st, &solver, args.n.max(1))
        .map_err(|e| e.to_string())?;
    for (iv, _) in &inputs {
        let hex: String = iv.bytes.iter().map(|b| format!("{b:02x}")).collect();
        println!("{}", if hex.is_empty() { "-".into() } else { hex });
    }
    println!("batches={} solver_calls={} inputs={}", st.batches, solver.calls(), inputs.len());
    Ok(())
}

/// Top-level driver used by the `legion` binary.
pub fn main_with(cli: Cli) -> i32 {
    let result = match &cli.cmd {
        Cmd::Run(a) => cmd_run(a),
        Cmd::Replay { dir, program } => cmd_replay(dir, program),
        Cmd::Oracle { program, tree_depth, conex_budget } => {
            cmd_oracle(program, *tree_depth, *conex_budget)
        }
        Cmd::Sensitivity(a) => cmd_sensitivity(a),
        Cmd::Sampler(a) => cmd_sampler(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
