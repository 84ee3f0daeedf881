//! `solver-cli check <file>`: decide a constraint file, printing
//! `sat <hex site values>` or `unsat`.

use clap::{Parser, Subcommand};
use legion::expr::parse_constraint_file;
use legion::solver::{CheckResult, SolverCtx};

#[derive(Parser)]
#[command(name = "solver-cli", about = "Decide bitvector constraint files")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    Check { file: std::path::PathBuf },
}

fn main() {
    let cli = Cli::parse();
    let Cmd::Check { file } = cli.cmd;
    let run = || -> Result<(), String> {
        let text = std::fs::read_to_string(&file)
            .map_err(|e| format!("cannot read {}: {e}", file.display()))?;
        let (site_widths, constraint) =
            parse_constraint_file(&text).map_err(|e| e.to_string())?;
        let solver = SolverCtx::new();
        match solver.check(&constraint, &site_widths).map_err(|e| e.to_string())? {
            CheckResult::Unsat => println!("unsat"),
            CheckResult::Sat(m) => {
                let vals: Vec<String> =
                    m.values.iter().map(|v| format!("{v:#x}")).collect();
                println!("sat {}", vals.join(" "));
            }
        }
        Ok(())
    };
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
