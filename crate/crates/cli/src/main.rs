use clap::{Args, Parser, Subcommand};
use fluxlab_core::config::{parse_config, Experiment};
use fluxlab_core::par::{self, Exec};
use fluxlab_core::runner::{self, Header};
use std::path::PathBuf;
use std::process::ExitCode;

const DEFAULT_OUT: &str = "fluxlab-out";

#[derive(Parser)]
#[command(name = "fluxlab", version, about = "Exact-diagonalization experiments for paired fermions in U(1) gauge fields")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Config file (TOML, or JSON if it starts with `{`). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; falls back to FLUXLAB_THREADS, then the config, then all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Operator identities behind the change of variables.
    Identities,
    /// Free-energy margins of random fields against the zero field.
    CheckTheorem,
    /// Ground-energy gaps of random fields against the zero field.
    GroundEnergy,
    /// Gauge covariance of the on-site pair correlation.
    Correlations,
    /// Pair correlation averaged over the gauge orbit.
    OrbitAverage,
    /// Gauge-dressed string correlations along several paths.
    String,
    /// Simulated annealing of the total free energy.
    Anneal,
    /// Full spectrum of one field configuration.
    Spectrum,
}

impl From<Command> for Experiment {
    fn from(c: Command) -> Self {
        match c {
            Command::Identities => Experiment::Identities,
            Command::CheckTheorem => Experiment::CheckTheorem,
            Command::GroundEnergy => Experiment::GroundEnergy,
            Command::Correlations => Experiment::Correlations,
            Command::OrbitAverage => Experiment::OrbitAverage,
            Command::String => Experiment::String,
            Command::Anneal => Experiment::Anneal,
            Command::Spectrum => Experiment::Spectrum,
        }
    }
}

fn env_threads() -> Result<Option<usize>, String> {
    match std::env::var("FLUXLAB_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(format!("FLUXLAB_THREADS: expected a positive integer, got `{v}`")),
        },
        Err(_) => Ok(None),
    }
}

fn fail(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(1)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let experiment = Experiment::from(cli.command);
    let text = match &cli.common.config {
        Some(p) => match std::fs::read_to_string(p) {
            Ok(t) => t,
            Err(e) => return fail(format!("{}: {e}", p.display())),
        },
        None => String::new(),
    };
    let mut cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(errs) => {
            for e in &errs {
                eprintln!("error: {e}");
            }
            return ExitCode::from(1);
        }
    };
    if let Some(s) = cli.common.seed {
        cfg.set_seed(s);
    }
    let threads = match env_threads() {
        Ok(env) => cli.common.threads.or(env).or(cfg.threads),
        Err(e) => return fail(e),
    };
    par::init_threads(threads);

    let out = match runner::run(&cfg, experiment, Exec::Parallel) {
        Ok(o) => o,
        Err(e) => return fail(e),
    };
    let dir = cli
        .common
        .out
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    if let Err(e) = runner::write_outputs(&dir, &out, &Header::capture()) {
        return fail(e);
    }
    println!(
        "{}: {} ({} tables in {})",
        experiment,
        if out.verdict { "pass" } else { "FAIL" },
        out.tables.len(),
        dir.display()
    );
    ExitCode::from(out.exit_code() as u8)
}
