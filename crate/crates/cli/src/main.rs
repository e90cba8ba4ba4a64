//! `crushflow`: evaluate, integrate and check the Cantor-crushing flow.

mod commands;
mod config;

use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use commands::{CrushArgs, DimArgs, EvalArgs, HolderArgs, NormsArgs, TrajArgs, VerifyArgs};
use config::{GlobalArgs, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "crushflow", version, about = "Divergence-free flows that crush the torus onto a Cantor set")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample a field on the M^d node grid at one time.
    Eval(EvalArgs),
    /// Trajectory from a Cantor address or a point.
    Traj(TrajArgs),
    /// Push the node grid through the generation-n crushing map.
    Crush(CrushArgs),
    /// Run the check suite; exits 1 if any check fails.
    Verify(VerifyArgs),
    /// Per-stage norms and fitted scaling exponents.
    Norms(NormsArgs),
    /// Box dimension of the Cantor set.
    Dim(DimArgs),
    /// Hölder quotient sweep.
    Holder(HolderArgs),
}

fn run(cli: Cli) -> Result<bool> {
    let cfg = RunConfig::resolve(&cli.global)?;
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match &cli.command {
        Command::Eval(a) => commands::eval(&cfg, a)?,
        Command::Traj(a) => commands::traj(&cfg, a)?,
        Command::Crush(a) => commands::crush(&cfg, a)?,
        Command::Verify(a) => return commands::verify(&cfg, a),
        Command::Norms(a) => commands::norms(&cfg, a)?,
        Command::Dim(a) => commands::dim(&cfg, a)?,
        Command::Holder(a) => commands::holder(&cfg, a)?,
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
