//! Command-line front end: scenario analysis, Monte Carlo simulation,
//! caching/DoF optimization, baseline reports, and figure-data reproduction.
//! All outputs are CSV curves (schema `sweep_value,<value>,error,kind`) with
//! a JSON sidecar holding the fully resolved configuration; sidecars can be
//! fed back as `--config` to reproduce a run byte for byte.

mod config;
mod figures;
mod runner;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cache_simo::model::ModelError;
use cache_simo::montecarlo::SimError;
use cache_simo::mrc::AnalysisError;
use cache_simo::numerics::NumericsError;
use cache_simo::optimize::OptimizeError;

/// Errors mapped to exit codes: configuration problems exit 2, numerical
/// failures exit 3.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical error: {m}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Domain(_) => CliError::Config(e.to_string()),
            AnalysisError::Numerics(_) => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<NumericsError> for CliError {
    fn from(e: NumericsError) -> Self {
        match e {
            NumericsError::Domain(_) => CliError::Config(e.to_string()),
            NumericsError::NonConvergence { .. } => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<OptimizeError> for CliError {
    fn from(e: OptimizeError) -> Self {
        match e {
            OptimizeError::Domain(_) | OptimizeError::InstanceTooLarge(_) => {
                CliError::Config(e.to_string())
            }
            OptimizeError::Model(_) => CliError::Config(e.to_string()),
            OptimizeError::Analysis(inner) => CliError::from(inner),
            OptimizeError::BracketFailure { .. } | OptimizeError::IterationCap { .. } => {
                CliError::Numerical(e.to_string())
            }
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::DofLengthMismatch { .. } => CliError::Config(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Config(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "cache-simo",
    version,
    about = "STP analysis, simulation and optimization of random caching in SIMO networks"
)]
struct Cli {
    /// RNG seed override (engine.seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; falls back to CACHE_SIMO_THREADS, then all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Optimizer convergence tolerance override (same as --eps on optimize).
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// Experiment configuration (TOML, or JSON; tool sidecars accepted).
    #[arg(long)]
    config: PathBuf,
    /// Override a config key, e.g. `--set scenario.m=4` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory override (output.dir).
    #[arg(long)]
    out: Option<String>,
    /// Monte Carlo trials override (engine.trials).
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Analytical STP curves (exact and closed-form bounds).
    Analyze {
        /// Receiver: `mrc` or `pzf`.
        receiver: String,
        #[command(flatten)]
        args: ConfigArgs,
    },
    /// Monte Carlo STP curves.
    Simulate {
        #[command(flatten)]
        args: ConfigArgs,
    },
    /// Caching/DoF optimization: `mrc`, `mrc-asymptotic`, `pzf`, `pzf-exhaustive`.
    Optimize {
        which: String,
        #[command(flatten)]
        args: ConfigArgs,
        /// Convergence tolerance of the CCCP stopping rule.
        #[arg(long, default_value_t = 1e-4)]
        eps: f64,
    },
    /// Caching vectors and analytical STPs of the three baseline schemes.
    Baselines {
        #[command(flatten)]
        args: ConfigArgs,
    },
    /// Reproduce the data behind one figure: 2, 3, 4, 5, 6, 7, 8a, 8b, 8c, 8d.
    Figure {
        id: String,
        /// `paper` (full-scale presets) or `desk` (N=20, 1e4 trials).
        #[arg(long, default_value = "desk")]
        scale: String,
        #[arg(long, default_value = "out")]
        out: String,
    },
}

fn load_config(args: &ConfigArgs, seed: Option<u64>) -> Result<config::ExperimentConfig, CliError> {
    let mut overrides = args.set.clone();
    if let Some(s) = seed {
        overrides.push(format!("engine.seed={s}"));
    }
    if let Some(t) = args.trials {
        overrides.push(format!("engine.trials={t}"));
    }
    if let Some(o) = &args.out {
        overrides.push(format!("output.dir={o}"));
    }
    config::load(&args.config, &overrides)
}

fn setup_threads(threads: Option<usize>) {
    let n = threads.or_else(|| {
        std::env::var("CACHE_SIMO_THREADS").ok().and_then(|v| v.parse().ok())
    });
    if let Some(n) = n {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    setup_threads(cli.threads);
    match cli.command {
        Command::Analyze { receiver, args } => {
            let mut config = load_config(&args, cli.seed)?;
            match receiver.as_str() {
                "mrc" => config.receiver.kind = "mrc".into(),
                "pzf" => config.receiver.kind = "pzf".into(),
                other => {
                    return Err(CliError::Config(format!(
                        "unknown receiver `{other}`; expected mrc or pzf"
                    )))
                }
            }
            if config.engine.kind == "monte_carlo" {
                return Err(CliError::Config(
                    "`analyze` needs an analytic or bound engine; use `simulate` for Monte Carlo"
                        .into(),
                ));
            }
            runner::cmd_run(&config, &format!("analyze {receiver}"), false)
        }
        Command::Simulate { args } => {
            let mut config = load_config(&args, cli.seed)?;
            config.engine.kind = "monte_carlo".into();
            runner::cmd_run(&config, "simulate", true)
        }
        Command::Optimize { which, args, eps } => {
            let config = load_config(&args, cli.seed)?;
            let eps = cli.tol.unwrap_or(eps);
            if !["mrc", "mrc-asymptotic", "pzf", "pzf-exhaustive"].contains(&which.as_str()) {
                return Err(CliError::Config(format!(
                    "unknown optimizer `{which}`; expected mrc, mrc-asymptotic, pzf or pzf-exhaustive"
                )));
            }
            runner::cmd_optimize(&config, &which, eps)
        }
        Command::Baselines { args } => {
            let config = load_config(&args, cli.seed)?;
            runner::cmd_baselines(&config)
        }
        Command::Figure { id, scale, out } => {
            let scale = match scale.as_str() {
                "paper" => figures::Scale::Paper,
                "desk" => figures::Scale::Desk,
                other => {
                    return Err(CliError::Config(format!(
                        "unknown scale `{other}`; expected paper or desk"
                    )))
                }
            };
            figures::run_figure(&id, scale, &PathBuf::from(out), cli.seed.unwrap_or(0))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
