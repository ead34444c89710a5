use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use pursuit_cli::commands::{cmd_bench, cmd_gap_curve, cmd_gen, cmd_solve, cmd_train, resolve, BenchName};

/// Proximal pursuit solvers, unrolled encoders and planted benchmarks.
///
/// Any config key can follow the subcommand as `--key value`; see
/// `config.txt` in an output directory for the full list.
#[derive(Parser)]
#[command(name = "pursuit", version)]
struct Cli {
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Flat `key = value` file applied before command-line overrides.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Overrides {
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "--KEY VALUE")]
    settings: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Exact pursuit for every column of a data matrix.
    Solve(Overrides),
    /// Train an encoder under one regime.
    Train(Overrides),
    /// Optimality gap against depth, untrained and trained.
    GapCurve(Overrides),
    /// Planted regime comparisons.
    Bench {
        #[arg(value_enum)]
        name: BenchName,
        #[command(flatten)]
        rest: Overrides,
    },
    /// Write a planted dataset.
    Gen(Overrides),
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let settings = match &cli.command {
        Command::Solve(o) | Command::Train(o) | Command::GapCurve(o) | Command::Gen(o) => &o.settings,
        Command::Bench { rest, .. } => &rest.settings,
    };
    let mut cfg = resolve(cli.config.as_deref(), settings)?;
    if let Some(seed) = cli.seed {
        cfg.set("seed", &seed.to_string())?;
    }
    if let Some(dir) = &cli.out_dir {
        cfg.set("out_dir", &dir.display().to_string())?;
    }
    match cli.command {
        Command::Solve(_) => cmd_solve(cfg),
        Command::Train(_) => cmd_train(cfg),
        Command::GapCurve(_) => cmd_gap_curve(cfg),
        Command::Bench { name, .. } => cmd_bench(cfg, name),
        Command::Gen(_) => cmd_gen(cfg),
    }
}
