use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use hawkmaker::{dispatch, CliError, Command, Invocation};
use hawkmaker_core::data_io::SplitResolution;

#[derive(Parser)]
#[command(name = "hawkmaker", version, about = "Limit-order-book exchange simulator with deep point-process market makers")]
struct Cli {
    /// Flat key = value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed override (wins over the config).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory for artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Config override, repeatable: --set key=value.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    #[command(subcommand)]
    command: CliCommand,
}

#[derive(Subcommand)]
enum CliCommand {
    /// Parse a binary feed (or event CSV) and rebuild the order book stream.
    Reconstruct {
        #[arg(long)]
        input: PathBuf,
    },
    /// Chronological train/validation/test split of an event stream.
    Split {
        #[arg(long)]
        input: PathBuf,
        /// Comma-separated proportions, e.g. 0.8,0.08,0.12.
        #[arg(long, default_value = "0.8,0.08,0.12")]
        ratios: String,
        /// ns keeps full resolution; ms collapses to milliseconds.
        #[arg(long, default_value = "ns")]
        resolution: String,
    },
    /// Maximum-likelihood fit of an exponential-kernel Hawkes process.
    FitHawkes {
        #[arg(long)]
        input: PathBuf,
    },
    /// Train the deep order-flow model on an event stream.
    TrainDhp {
        #[arg(long)]
        input: PathBuf,
        /// Validation stream; defaults to a chronological 10% tail split.
        #[arg(long)]
        val: Option<PathBuf>,
        /// dhp (deep, power-law decay) or nhp (depth-1 exponential benchmark).
        #[arg(long, default_value = "dhp")]
        mode: String,
    },
    /// Next-event predictions of a trained model over a held-out stream.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Events consumed before the first prediction.
        #[arg(long, default_value_t = 20)]
        burn: usize,
        /// Cap on the number of predictions.
        #[arg(long)]
        max_events: Option<usize>,
    },
    /// Run one trading session from the config.
    Simulate,
    /// Run independent sessions over consecutive day seeds.
    Campaign {
        #[arg(long, default_value_t = 5)]
        days: usize,
    },
    /// Paired campaigns with and without the cancellation mechanism.
    AblateCancel {
        #[arg(long, default_value_t = 5)]
        days: usize,
    },
    /// Book summary statistics and queue-value curve of a session directory.
    Analyze {
        #[arg(long)]
        input: PathBuf,
    },
    /// Stylized-fact report of simulated (or provided) mid prices.
    Stylized {
        /// market.csv from a session; omitted = simulate fresh sessions.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        days: usize,
        #[arg(long, default_value_t = 60.0)]
        dt_secs: f64,
        /// Also report Hill exponents at 2.5%/5%/10% tail fractions.
        #[arg(long)]
        tail_sweep: bool,
    },
    /// Finite-difference validation of the model gradients.
    Gradcheck,
}

fn parse_ratios(raw: &str) -> Result<(f64, f64, f64), CliError> {
    let parts: Vec<&str> = raw.split(',').collect();
    if parts.len() != 3 {
        return Err(CliError::Usage(format!(
            "expected three comma-separated ratios, got '{raw}'"
        )));
    }
    let mut vals = [0.0; 3];
    for (slot, part) in vals.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("bad ratio '{part}'")))?;
    }
    Ok((vals[0], vals[1], vals[2]))
}

fn to_invocation(cli: Cli) -> Result<Invocation, CliError> {
    let mut overrides = Vec::new();
    for pair in &cli.set {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects key=value, got '{pair}'")))?;
        overrides.push((k.trim().to_string(), v.trim().to_string()));
    }
    let command = match cli.command {
        CliCommand::Reconstruct { input } => Command::Reconstruct { input },
        CliCommand::Split {
            input,
            ratios,
            resolution,
        } => Command::Split {
            input,
            ratios: parse_ratios(&ratios)?,
            resolution: match resolution.as_str() {
                "ns" => SplitResolution::Nanosecond,
                "ms" => SplitResolution::Millisecond,
                other => {
                    return Err(CliError::Usage(format!(
                        "resolution must be ns or ms, got '{other}'"
                    )))
                }
            },
        },
        CliCommand::FitHawkes { input } => Command::FitHawkes { input },
        CliCommand::TrainDhp { input, val, mode } => Command::TrainDhp {
            input,
            val,
            neural_hawkes_mode: match mode.as_str() {
                "dhp" => false,
                "nhp" => true,
                other => {
                    return Err(CliError::Usage(format!(
                        "mode must be dhp or nhp, got '{other}'"
                    )))
                }
            },
        },
        CliCommand::Predict {
            model,
            input,
            burn,
            max_events,
        } => Command::Predict {
            model,
            input,
            burn,
            max_events,
        },
        CliCommand::Simulate => Command::Simulate,
        CliCommand::Campaign { days } => Command::Campaign { days },
        CliCommand::AblateCancel { days } => Command::AblateCancel { days },
        CliCommand::Analyze { input } => Command::Analyze { input },
        CliCommand::Stylized {
            input,
            days,
            dt_secs,
            tail_sweep,
        } => Command::Stylized {
            input,
            days,
            dt_secs,
            tail_sweep,
        },
        CliCommand::Gradcheck => Command::Gradcheck,
    };
    Ok(Invocation {
        command,
        config_path: cli.config,
        seed: cli.seed,
        out_dir: cli.out,
        overrides,
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    let invocation = match to_invocation(cli) {
        Ok(inv) => inv,
        Err(err) => {
            eprintln!("error: {err}");
            return ExitCode::from(err.exit_code() as u8);
        }
    };
    match dispatch(&invocation) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
