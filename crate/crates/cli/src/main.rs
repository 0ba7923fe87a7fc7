//! `fldi` — reproducible experiment runs for the folded-interferometer
//! photon-pair source model. Every subcommand reads one JSON config, draws
//! all randomness from one seed, and writes CSV files plus a `run.meta`
//! sidecar into the output directory.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use fldi_core::error::Error;
use fldi_core::ExperimentConfig;

mod commands;

#[derive(Parser)]
#[command(name = "fldi", version, about = "Folded-interferometer photon-pair source toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed from the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for CSV files and run.meta.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Print the two-photon state and its Bell-state fidelities.
    State(RunArgs),
    /// Pump-wavelength / crystal-temperature phase-matching maps.
    Phasematch(RunArgs),
    /// Pump-power sweep of rates, CAR, brightness, heralding, with fits.
    Powersweep(RunArgs),
    /// Polarization-correlation fringes, visibilities, fidelity, QBER.
    Visibility(RunArgs),
    /// Retroreflector tip/tilt misalignment sweep.
    Misalign(RunArgs),
    /// Long-run rate monitor with Allan-deviation analysis.
    Stability(RunArgs),
    /// Retroreflector polarization sweeps for the catalogued models.
    Ccr(RunArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Self::State(_) => "state",
            Self::Phasematch(_) => "phasematch",
            Self::Powersweep(_) => "powersweep",
            Self::Visibility(_) => "visibility",
            Self::Misalign(_) => "misalign",
            Self::Stability(_) => "stability",
            Self::Ccr(_) => "ccr",
        }
    }

    fn args(&self) -> &RunArgs {
        match self {
            Self::State(a)
            | Self::Phasematch(a)
            | Self::Powersweep(a)
            | Self::Visibility(a)
            | Self::Misalign(a)
            | Self::Stability(a)
            | Self::Ccr(a) => a,
        }
    }
}

/// Exit codes: 0 success, 1 runtime/model error, 2 usage/config error.
fn exit_code_for(error: &Error) -> u8 {
    match error {
        Error::Config { .. } | Error::Domain(_) => 2,
        _ => 1,
    }
}

fn run(cli: &Cli) -> Result<(), Error> {
    let start = Instant::now();
    let args = cli.command.args();
    let mut config = ExperimentConfig::from_file(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    std::fs::create_dir_all(&args.out_dir)?;

    match &cli.command {
        Command::State(_) => commands::cmd_state(&config, &args.out_dir)?,
        Command::Phasematch(_) => commands::cmd_phasematch(&config, &args.out_dir)?,
        Command::Powersweep(_) => commands::cmd_powersweep(&config, &args.out_dir)?,
        Command::Visibility(_) => commands::cmd_visibility(&config, &args.out_dir)?,
        Command::Misalign(_) => commands::cmd_misalign(&config, &args.out_dir)?,
        Command::Stability(_) => commands::cmd_stability(&config, &args.out_dir)?,
        Command::Ccr(_) => commands::cmd_ccr(&config, &args.out_dir)?,
    }

    write_run_meta(&args.out_dir, cli.command.name(), &config, start)?;
    Ok(())
}

fn write_run_meta(
    out_dir: &Path,
    command: &str,
    config: &ExperimentConfig,
    start: Instant,
) -> Result<(), Error> {
    let meta = format!(
        "command={command}\nconfig_hash={:016x}\nseed={}\nversion={}\nwall_time_s={:.3}\n",
        config.content_hash(),
        config.seed,
        fldi_core::VERSION,
        start.elapsed().as_secs_f64(),
    );
    std::fs::write(out_dir.join("run.meta"), meta)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
