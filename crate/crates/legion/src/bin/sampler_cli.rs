//! Standalone constrained-sampling harness: emit inputs for a
//! constraint file as hex lines plus a summary line.

use clap::Parser;
use legion::cli::{cmd_sampler, SamplerArgs};

#[derive(Parser)]
#[command(name = "sampler-cli", about = "Sample inputs satisfying a constraint file")]
struct Cli {
    #[command(flatten)]
    args: SamplerArgs,
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = cmd_sampler(&cli.args) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
