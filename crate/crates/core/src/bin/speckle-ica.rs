use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use speckle_ica::experiment::{self, ExperimentConfig, Profile, RunOverrides, RunReport};
use speckle_ica::Error;

/// Blind source separation imaging experiments.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Output directory (default: config `output`, then $SPECKLE_ICA_OUT/<scenario>, then runs/<scenario>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Parameter profile: desk or paper.
    #[arg(long)]
    profile: Option<Profile>,
}

impl RunArgs {
    fn overrides(&self) -> RunOverrides {
        RunOverrides { out: self.out.clone(), seed: self.seed, profile: self.profile }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario described by a config file.
    Run {
        config: PathBuf,
        #[command(flatten)]
        args: RunArgs,
    },
    /// Check a config without running it.
    Validate { config: PathBuf },
    /// Run a config once per value of one parameter.
    Sweep {
        config: PathBuf,
        /// Dotted path of the parameter, e.g. imaging.eta_f.
        #[arg(long)]
        param: String,
        /// Comma-separated values; each is read as JSON, falling back to a string.
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
        #[command(flatten)]
        args: RunArgs,
    },
}

fn exit_for(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        Error::Config(_) => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}

fn report(r: &RunReport) -> bool {
    let m = &r.manifest;
    println!("{} -> {} [{:?}] config {}", m.scenario, r.dir.display(), m.status, &m.config_hash[..12]);
    for f in &m.failures {
        eprintln!("failure: {f}");
    }
    r.succeeded()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Validate { config } => {
            let cfg = match ExperimentConfig::load(&config) {
                Ok(c) => c,
                Err(e) => return exit_for(&e),
            };
            let rep = experiment::validate(&cfg);
            println!("{}", serde_json::to_string_pretty(&rep).unwrap_or_default());
            if rep.is_clean() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Command::Run { config, args } => {
            let result = ExperimentConfig::load(&config).and_then(|c| experiment::run(&c, &args.overrides()));
            match result {
                Ok(r) if report(&r) => ExitCode::SUCCESS,
                Ok(_) => ExitCode::from(1),
                Err(e) => exit_for(&e),
            }
        }
        Command::Sweep { config, param, values, args } => {
            let values: Vec<serde_json::Value> = values.iter().map(|v| serde_json::from_str(v).unwrap_or_else(|_| serde_json::Value::String(v.clone()))).collect();
            let result = ExperimentConfig::load(&config).and_then(|c| experiment::sweep(&c, &param, &values, &args.overrides()));
            match result {
                Ok(reports) => {
                    let ok = reports.iter().map(report).fold(true, |a, b| a && b);
                    if ok {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(1)
                    }
                }
                Err(e) => exit_for(&e),
            }
        }
    }
}
