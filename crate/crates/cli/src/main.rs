mod commands;
mod config;
mod output;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use config::{parse_sweep, Overrides, RunConfig};
use output::RunDir;

/// Photodetection as quantum jumps and as decoherent histories.
///
/// Exit status: 0 when every asserted band holds, 1 when one fails, 2 when
/// the run cannot be carried out (bad config, failed precondition, I/O).
#[derive(Parser, Debug)]
#[command(name = "jumphist", version)]
struct Cli {
    /// TOML config with dotted keys (model.*, run.*, output.*).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output root; a timestamped run directory is created inside it.
    /// Falls back to `output.dir`, then $JUMPHIST_OUT, then ./runs.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    n_steps: Option<usize>,
    #[arg(long, global = true)]
    traj_count: Option<usize>,
    #[arg(long, global = true)]
    total_time: Option<f64>,
    /// Comma-separated sweep values, e.g. "100,300,1000,3100".
    #[arg(long, global = true)]
    sweep: Option<String>,
    #[arg(long, global = true)]
    window_steps: Option<usize>,
    #[arg(long, global = true)]
    band_constant: Option<f64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Full decoherence matrix, sum-rule checks and attained epsilon.
    Histories,
    /// Seeded jump trajectories and their ensemble average.
    Trajectories,
    /// History probabilities against the no-jump and one-jump formulas.
    Compare,
    /// Log-log fit of the decoherence ratio against G dt.
    Scaling,
    /// Unraveling consistency and adiabatic-elimination validity.
    Validate,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Histories => "histories",
            Command::Trajectories => "trajectories",
            Command::Compare => "compare",
            Command::Scaling => "scaling",
            Command::Validate => "validate",
        }
    }
}

fn load(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.apply(&Overrides {
        seed: cli.seed,
        out: cli.out.clone(),
        n_steps: cli.n_steps,
        traj_count: cli.traj_count,
        total_time: cli.total_time,
        sweep: cli.sweep.as_deref().map(parse_sweep).transpose().map_err(anyhow::Error::msg)?,
        window_steps: cli.window_steps,
        band_constant: cli.band_constant,
    });
    cfg.resolve()
}

fn run(cli: &Cli) -> Result<bool> {
    let cfg = load(cli)?;
    cfg.model.warn_advisories();
    let dir = RunDir::create(&cfg.output_root(), cli.command.name())?;
    let manifest = format!(
        "# Resolved configuration of this run; replay with\n# jumphist {} --config manifest.toml\n{}",
        cli.command.name(),
        cfg.to_toml()?
    );
    dir.write("manifest.toml", &manifest)?;
    log::info!("writing to {}", dir.path().display());

    let outcome = match cli.command {
        Command::Histories => commands::histories(&cfg, &dir)?,
        Command::Trajectories => commands::trajectories(&cfg, &dir)?,
        Command::Compare => commands::compare(&cfg, &dir)?,
        Command::Scaling => commands::scaling(&cfg, &dir)?,
        Command::Validate => commands::validate(&cfg, &dir)?,
    };
    // Results are already on disk; a closed stdout (e.g. `| head`) is not an error.
    let mut stdout = std::io::stdout().lock();
    match write!(stdout, "{}output: {}\n", outcome.summary, dir.path().display()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => return Err(e.into()),
        _ => {}
    }
    Ok(outcome.pass)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
