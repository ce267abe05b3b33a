use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hyperfold::harness::config::{validate_config, ScenarioConfig};
use hyperfold::harness::runner::run_subcommand;
use hyperfold::Error;

#[derive(Parser)]
#[command(
    name = "hyperfold",
    version,
    about = "Audit harness for geodesic-distance phases, the frequency-localized \
             wave kernel, and oscillatory operator-norm decay"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario config (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides output_dir from the config)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker count hint; results are identical for any value
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Phase surface, mixed derivative, and zero-set geometry
    Phase(RunArgs),
    /// Per-region derivative lower bounds and mixed-derivative sup norms
    Bounds(RunArgs),
    /// Frequency-localized wave kernel sweep over (r, lambda)
    Kernel(RunArgs),
    /// Operator-norm decay fit over the dyadic frequency grid
    Decay(RunArgs),
    /// Bessel series/asymptotic overlap check
    Bessel(RunArgs),
    /// Four-region partitioned operator-norm bound audit
    Composite(RunArgs),
}

const EXIT_CONFIG: u8 = 1;
const EXIT_AUDIT: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, args) = match &cli.cmd {
        Cmd::Phase(a) => ("phase", a),
        Cmd::Bounds(a) => ("bounds", a),
        Cmd::Kernel(a) => ("kernel", a),
        Cmd::Decay(a) => ("decay", a),
        Cmd::Bessel(a) => ("bessel", a),
        Cmd::Composite(a) => ("composite", a),
    };
    if let Some(n) = args.threads {
        if n == 0 {
            eprintln!("--threads must be >= 1");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    let raw = match std::fs::read_to_string(&args.config) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("cannot read config {}: {e}", args.config.display());
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let (cfg, warnings): (ScenarioConfig, Vec<String>) = match validate_config(&raw) {
        Ok(v) => v,
        Err(Error::Config(errs)) => {
            for e in &errs {
                eprintln!("config error: {e}");
            }
            return ExitCode::from(EXIT_CONFIG);
        }
        Err(other) => {
            eprintln!("config error: {other}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    for w in &warnings {
        eprintln!("config warning: {w}");
    }
    let out_dir = match args.out.clone().or_else(|| cfg.output_dir.clone().map(PathBuf::from)) {
        Some(d) => d,
        None => {
            eprintln!("no output directory: pass --out or set output_dir in the config");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match run_subcommand(name, &cfg, &out_dir) {
        Ok((files, summary)) => {
            println!("{summary}");
            for f in files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{name} failed: {e}");
            ExitCode::from(EXIT_AUDIT)
        }
    }
}
