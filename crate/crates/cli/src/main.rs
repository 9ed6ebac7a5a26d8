use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hypofem_cli::config::{PartialConfig, RunConfig};
use hypofem_cli::{run, CliError};

#[derive(Parser)]
#[command(name = "hypofem", version, about = "Stabilised finite element experiments for the Kolmogorov equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Error and EOC table over a sequence of meshes.
    Convergence(Flags),
    /// Trajectory of ‖U(t⁻)‖_A for a homogeneous problem, with its envelope.
    Decay(Flags),
    /// One solve; exports the final field as CSV and VTK.
    Solve(Flags),
    /// Per-element stabilisation parameters as CSV.
    ParamsDump(Flags),
}

#[derive(Args)]
struct Flags {
    /// JSON configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// stationary, instationary or decay.
    #[arg(long)]
    case: Option<String>,
    /// galerkin, supg or hypo.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    q: Option<usize>,
    /// Element counts of the form 2n², comma separated.
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<usize>>,
    /// single, h, h2 or fixed:<k>.
    #[arg(long)]
    k_rule: Option<String>,
    #[arg(long)]
    t_f: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Keep levels above 2048 elements for p ≥ 3 with k = h².
    #[arg(long)]
    allow_finest: bool,
}

impl Flags {
    fn partial(self) -> Result<PartialConfig, CliError> {
        let base = match &self.config {
            Some(path) => PartialConfig::from_file(path)?,
            None => PartialConfig::default(),
        };
        Ok(base.overlay(PartialConfig {
            case: self.case,
            method: self.method,
            p: self.p,
            q: self.q,
            levels: self.levels,
            k_rule: self.k_rule,
            t_f: self.t_f,
            out: self.out,
            seed: self.seed,
            threads: self.threads,
            allow_finest: self.allow_finest.then_some(true),
            ..Default::default()
        }))
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let (name, flags) = match cli.command {
        Command::Convergence(f) => ("convergence", f),
        Command::Decay(f) => ("decay", f),
        Command::Solve(f) => ("solve", f),
        Command::ParamsDump(f) => ("params-dump", f),
    };
    let cfg = RunConfig::resolve(name, flags.partial()?)?;
    log::info!("configuration {}:\n{}", cfg.hash(), cfg.to_json());
    let out = run::dispatch(&cfg)?;
    for line in &out.summary {
        println!("{line}");
    }
    for f in &out.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 3 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
