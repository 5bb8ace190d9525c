//! `spingate`: fidelity budgets, parameter sweeps and calibration fits for
//! the heralded spin-photon gate.

mod commands;
mod config;
mod data;
mod error;
mod report;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "spingate", version, about = "Heralded spin-photon gate simulator")]
struct Cli {
    /// TOML configuration; the bundled reference parameters when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Print the report as JSON instead of a table.
    #[arg(long, global = true)]
    json: bool,
    /// Also write the report as CSV to this path.
    #[arg(long, global = true, value_name = "PATH")]
    csv: Option<PathBuf>,
    /// Seed for stochastic steps (bootstrap).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel steps.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Multiplicative fidelity budget next to the full gate simulation.
    Budget,
    /// Fidelity, success probability and visibility over a parameter grid.
    Sweep {
        /// Dotted field path, e.g. emitter.kappa_flip or pulse.sigma_o.
        #[arg(long)]
        param: String,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long, default_value_t = 11)]
        steps: usize,
    },
    /// Photon visibility, and the dephasing rate from a measured series.
    Visibility {
        /// CSV with columns n_bar, visibility[, visibility_err].
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Fit of the power-saturation curve.
    Saturation {
        /// CSV with columns power_nw, counts[, spin_state].
        #[arg(long)]
        data: PathBuf,
        /// Pin b2 to fix the scale freedom of the fit.
        #[arg(long)]
        b2: Option<f64>,
        /// Power in nW at which to report photon numbers (uses --config).
        #[arg(long)]
        power: Option<f64>,
    },
    /// Concurrence from coincidence counts with a Poisson bootstrap.
    Concurrence {
        /// CSV with columns outcome, counts.
        #[arg(long)]
        counts: PathBuf,
        /// Equatorial contrasts, needed when the counts lack middle-window rows.
        #[arg(long, allow_hyphen_values = true, requires = "my")]
        mx: Option<f64>,
        #[arg(long, allow_hyphen_values = true, requires = "mx")]
        my: Option<f64>,
        #[arg(long, default_value_t = 10_000)]
        resamples: usize,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.jobs {
        // Ignore failure if a pool already exists; sweeps build their own.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
    let rendered = match &cli.command {
        Command::Budget => {
            let (cfg, text) = config::load(cli.config.as_deref())?;
            commands::budget(&cfg, &text, cli.seed)?
        }
        Command::Sweep {
            param,
            from,
            to,
            steps,
        } => {
            let (cfg, text) = config::load(cli.config.as_deref())?;
            commands::sweep(&cfg, &text, param, *from, *to, *steps, cli.jobs, cli.seed)?
        }
        Command::Visibility { data } => {
            let (cfg, text) = config::load(cli.config.as_deref())?;
            commands::visibility(&cfg, &text, data.as_deref(), cli.seed)?
        }
        Command::Saturation { data, b2, power } => match power {
            Some(p) => {
                let (cfg, text) = config::load(cli.config.as_deref())?;
                commands::saturation(data, *b2, Some((*p, &cfg, &text)), cli.seed)?
            }
            None => commands::saturation(data, *b2, None, cli.seed)?,
        },
        Command::Concurrence {
            counts,
            mx,
            my,
            resamples,
        } => {
            let contrasts = mx.zip(*my);
            commands::concurrence(counts, contrasts, *resamples, cli.seed.unwrap_or(0))?
        }
    };
    rendered.emit(cli.json, cli.csv.as_deref())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("spingate: {e}");
        std::process::exit(e.exit_code());
    }
}
