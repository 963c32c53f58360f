use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use chodim::harness::{cmd_check, cmd_dimension, cmd_lyapunov, cmd_selftest, cmd_simulate, exit_code, CheckKind, Outcome, RunConfig};

#[derive(Parser)]
#[command(name = "chodim", version, about = "Damped hyperbolic Cahn-Hilliard-Oono solver and volume-contraction dimension bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run tangent frames on a single thread.
    #[arg(long, global = true)]
    serial: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum CheckArg {
    Energy,
    Tangent,
    Liouville,
    MetricIdentity,
}

impl From<CheckArg> for CheckKind {
    fn from(c: CheckArg) -> Self {
        match c {
            CheckArg::Energy => CheckKind::Energy,
            CheckArg::Tangent => CheckKind::Tangent,
            CheckArg::Liouville => CheckKind::Liouville,
            CheckArg::MetricIdentity => CheckKind::MetricIdentity,
        }
    }
}

#[derive(clap::Args)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate and write energy history and snapshots.
    Simulate(RunArgs),
    /// Run one residual suite.
    Check {
        kind: CheckArg,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Estimate the volume-contraction dimension on attractor samples.
    Dimension(RunArgs),
    /// Lyapunov exponents and the trace inequality.
    Lyapunov(RunArgs),
    /// Every residual suite on a small built-in case.
    Selftest {
        #[arg(long, default_value = "selftest_out")]
        out: PathBuf,
    },
}

fn load(args: &RunArgs) -> chodim::Result<RunConfig> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(o) = &args.out {
        cfg.output_dir = o.clone();
    }
    Ok(cfg)
}

fn run(cli: Cli) -> chodim::Result<Outcome> {
    let parallel = !cli.serial;
    match cli.command {
        Command::Simulate(a) => cmd_simulate(&load(&a)?),
        Command::Check { kind, run } => cmd_check(&load(&run)?, kind.into()),
        Command::Dimension(a) => cmd_dimension(&load(&a)?, parallel),
        Command::Lyapunov(a) => cmd_lyapunov(&load(&a)?, parallel),
        Command::Selftest { out } => cmd_selftest(&out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("CHODIM_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        let threads = if cli.serial { 1 } else { n };
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().ok();
    } else if cli.serial {
        rayon::ThreadPoolBuilder::new().num_threads(1).build_global().ok();
    }
    match run(cli) {
        Ok(o) => {
            eprintln!("{}", o.message);
            ExitCode::from(o.code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
