mod config;
mod output;
mod studies;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use config::{Command, ConfigError, Overrides};

#[derive(Parser)]
#[command(name = "omega-limit", version, about = "Omega-limit sets, trapping regions and Poincare sections")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Integrate one trajectory and write it as CSV.
    Simulate(Common),
    /// Locate and classify equilibria.
    Equilibria(Common),
    /// Scan r for the pitchfork and Hopf thresholds (lorenz).
    Bifurcation(Common),
    /// Check a trapping sphere and export the zero-set ellipsoid (lorenz).
    Trapping(Common),
    /// Sample an omega-limit set as a point cloud.
    Omega(Common),
    /// Poincare section, return maps and regularity scores.
    Section(Common),
    /// Regenerate all figure data with pinned settings.
    ReproduceFigures(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// Flat TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in system: quintic1d, vanderpol, brusselator or lorenz.
    #[arg(long)]
    system: Option<String>,
    /// Lorenz parameter r.
    #[arg(long, allow_negative_numbers = true)]
    r: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

enum Failure {
    Config(String),
    Numeric(omega_limit::Error),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numeric(_) => 3,
            Failure::Io(_) => 4,
        }
    }

    fn to_json(&self) -> serde_json::Value {
        let (category, kind, message) = match self {
            Failure::Config(m) => ("config", "invalid_config", m.clone()),
            Failure::Numeric(e) => ("numeric", e.kind(), e.to_string()),
            Failure::Io(m) => ("io", "io", m.clone()),
        };
        json!({ "error": { "category": category, "kind": kind, "message": message }, "exit_code": self.code() })
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("OMEGA_LIMIT_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Failure::Config(format!("OMEGA_LIMIT_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Config(format!("cannot configure worker pool: {e}")))
}

fn execute(command: Command, args: Common) -> Result<(), Failure> {
    configure_threads()?;
    let file = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Config(format!("cannot read config {}: {e}", path.display())))?;
            config::parse_file(&text, command)?
        }
        None => config::FileConfig::default(),
    };
    let overrides = Overrides { system: args.system, r: args.r, out: args.out, seed: args.seed };
    let resolved = config::resolve(command, file, overrides)?;
    let artifacts = studies::run(&resolved).map_err(|e| {
        if e.is_validation() {
            Failure::Config(e.to_string())
        } else {
            Failure::Numeric(e)
        }
    })?;
    artifacts
        .write_all(&resolved.out)
        .map_err(|e| Failure::Io(format!("writing to {}: {e}", resolved.out.display())))?;
    let mut stdout = std::io::stdout().lock();
    let _ = studies::describe(&artifacts, &mut stdout);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Sub::Simulate(a) => (Command::Simulate, a),
        Sub::Equilibria(a) => (Command::Equilibria, a),
        Sub::Bifurcation(a) => (Command::Bifurcation, a),
        Sub::Trapping(a) => (Command::Trapping, a),
        Sub::Omega(a) => (Command::Omega, a),
        Sub::Section(a) => (Command::Section, a),
        Sub::ReproduceFigures(a) => (Command::ReproduceFigures, a),
    };
    match execute(command, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.to_json());
            ExitCode::from(f.code())
        }
    }
}
