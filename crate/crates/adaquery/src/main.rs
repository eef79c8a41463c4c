use std::path::PathBuf;
use std::process::ExitCode;

use adaquery::{ExperimentConfig, RunError};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "adaquery", version, about = "Run adaptive-query experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its CSV and JSON summary.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads for independent trials.
        #[arg(long)]
        jobs: Option<usize>,
        /// Override a config value, e.g. `--set params.k=10`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Parse and check a config without running it.
    Validate {
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

fn load(config: &PathBuf, overrides: &[String], seed: Option<u64>) -> Result<ExperimentConfig, RunError> {
    let mut overrides = overrides.to_vec();
    if let Some(s) = seed {
        overrides.push(format!("seed={s}"));
    }
    ExperimentConfig::load(config, &overrides)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run {
            config,
            seed,
            jobs,
            overrides,
        } => load(config, overrides, *seed).and_then(|cfg| {
            for w in adaquery::validate(&cfg)? {
                eprintln!("warning: {w}");
            }
            let outcome = adaquery::run(&cfg, *jobs)?;
            for c in &outcome.checks {
                let status = if c.passed { "pass" } else if c.enforced { "FAIL" } else { "fail (not enforced)" };
                println!("{status}: {} = {} (required {} {})", c.name, c.value, c.op, c.threshold);
            }
            Ok(outcome.passed())
        }),
        Command::Validate { config, overrides } => load(config, overrides, None).and_then(|cfg| {
            for w in adaquery::validate(&cfg)? {
                eprintln!("warning: {w}");
            }
            println!("ok: {}", cfg.kind);
            Ok(true)
        }),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
