use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use coupled_cavity::cli::{error_json, run_command, write_bundle, zeta_bundle, Command, RunOptions};
use coupled_cavity::config::{parse_config, Angle, ExperimentConfig, OutputFormat};
use coupled_cavity::{Error, Result};

#[derive(Parser)]
#[command(name = "cavsim", version, about = "Coupled-cavity interference simulator")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Args)]
struct GlobalArgs {
    /// JSON experiment config
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file (stdout when omitted)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Worker threads for sweeps
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Cross-check against an independent propagator
    #[arg(long, global = true)]
    validate: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Sub {
    /// Time-domain run of the configured protocol
    Simulate,
    /// Lifetime over a parameter grid
    Sweep,
    /// End-cavity lifetime against chain length
    Chain,
    /// Master-equation run or (Δφ, g) lifetime grid
    Lindblad,
    /// Complex eigenfrequencies of the generator
    Eigen,
    /// Effective cable coupling and tunneling phase
    Zeta {
        /// Cable phase, radians or "<x>pi"
        #[arg(long, value_parser = parse_angle, allow_hyphen_values = true)]
        theta: f64,
        /// Single-pass attenuation
        #[arg(long)]
        gamma0l0: f64,
        #[arg(long, default_value_t = 1.0)]
        gamma1: f64,
        #[arg(long, default_value_t = 1.0)]
        gamma2: f64,
    },
}

impl Sub {
    fn name(&self) -> &'static str {
        match self {
            Sub::Simulate => "simulate",
            Sub::Sweep => "sweep",
            Sub::Chain => "chain",
            Sub::Lindblad => "lindblad",
            Sub::Eigen => "eigen",
            Sub::Zeta { .. } => "zeta",
        }
    }
}

fn parse_angle(s: &str) -> std::result::Result<f64, String> {
    Angle::parse(s).map(|a| a.0).map_err(|e| e.to_string())
}

fn load(path: &Option<PathBuf>) -> Result<Option<ExperimentConfig>> {
    path.as_ref()
        .map(|p| {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
            parse_config(&text)
        })
        .transpose()
}

fn execute(cli: &Cli) -> Result<()> {
    let g = &cli.global;
    if let Some(n) = g.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidParameter {
                name: "threads",
                reason: e.to_string(),
            })?;
    }
    let config = load(&g.config)?;
    let bundle = match &cli.command {
        Sub::Zeta {
            theta,
            gamma0l0,
            gamma1,
            gamma2,
        } => zeta_bundle(*theta, *gamma0l0, *gamma1, *gamma2, config.as_ref())?,
        other => {
            let config = config.as_ref().ok_or_else(|| {
                Error::InvalidConfig(format!("`{}` needs --config", other.name()))
            })?;
            let command = match other {
                Sub::Simulate => Command::Simulate,
                Sub::Sweep => Command::Sweep,
                Sub::Chain => Command::Chain,
                Sub::Lindblad => Command::Lindblad,
                Sub::Eigen => Command::Eigen,
                Sub::Zeta { .. } => unreachable!(),
            };
            run_command(config, command, RunOptions { validate: g.validate })?
        }
    };
    if let Some(dev) = bundle.metadata.extras.get("validation_max_relative_deviation") {
        eprintln!("validation: max relative deviation {dev}");
    }
    if let Some(dev) = bundle.metadata.extras.get("validation_max_abs_deviation") {
        eprintln!("validation: max absolute deviation {dev}");
    }
    let out = g
        .out
        .clone()
        .or_else(|| config.as_ref().and_then(|c| c.output.path.clone()).map(PathBuf::from));
    let format = match g.format {
        Some(Format::Csv) => OutputFormat::Csv,
        Some(Format::Json) => OutputFormat::Json,
        None => config.as_ref().map(|c| c.output.format).unwrap_or_default(),
    };
    write_bundle(&bundle, out.as_deref(), format)?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let context = json!({
                "command": cli.command.name(),
                "config": cli.global.config.as_ref().map(|p| p.display().to_string()),
            });
            eprintln!("{}", error_json(&e, context));
            ExitCode::FAILURE
        }
    }
}
