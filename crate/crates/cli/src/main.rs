use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ringpair_cli::{commands, CliError, Context, ExperimentConfig, Format, Outcome};

#[derive(Parser)]
#[command(name = "ringpair", version, about = "Microring photon-pair source simulator and analysis")]
struct Cli {
    /// Experiment configuration (TOML). Defaults to the built-in device.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the run seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pair rate, linewidth, FSR and brightness of the configured ring.
    Pgr,
    /// Pump-power sweep: time tags, histograms, singles, CAR, inferred rate.
    Simulate,
    /// Interferometer phase sweep and visibility.
    Franson,
    /// Heralded second-order correlation.
    G2h,
    /// Published platform comparison.
    Compare {
        /// Also write isolines of constant Q³/R².
        #[arg(long)]
        isolines: bool,
    },
    /// Analyse a recorded time-tag file.
    Replay {
        input: PathBuf,
        /// Acquisition length; defaults to the last timestamp.
        #[arg(long)]
        duration_s: Option<f64>,
    },
    /// Print the effective configuration.
    Config,
}

fn run(cli: Cli) -> Result<(Outcome, Format), CliError> {
    let mut config = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::reference(),
    };
    if let Some(s) = cli.seed {
        config.run.seed = s;
    }
    if let Some(f) = cli.format {
        config.output.format = f;
    }
    if let Some(o) = &cli.out {
        config.output.directory = o.display().to_string();
    }
    config.validate()?;
    let ctx = Context::new(config);
    let outcome = match cli.command {
        Command::Pgr => commands::pgr(&ctx)?,
        Command::Simulate => commands::simulate(&ctx)?,
        Command::Franson => commands::franson(&ctx)?,
        Command::G2h => commands::g2h(&ctx)?,
        Command::Compare { isolines } => commands::compare(&ctx, isolines)?,
        Command::Replay { input, duration_s } => commands::replay(&ctx, &input, duration_s)?,
        Command::Config => {
            print!("{}", ctx.config.to_toml());
            Outcome::default()
        }
    };
    Ok((outcome, ctx.format))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok((outcome, format)) => {
            print!("{}{}", outcome.preamble, outcome.report.render(format));
            if let Some(msg) = &outcome.insufficient {
                eprintln!("insufficient statistics: {msg}");
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
