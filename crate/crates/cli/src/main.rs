use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bsmrmr_cli::{error_json, exit_code, run, RunConfig, Verb};

/// Bayesian sparse multivariate regression for mixed responses.
#[derive(Parser)]
#[command(name = "bsmrmr", version)]
struct Cli {
    #[command(subcommand)]
    verb: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    chains: Option<usize>,
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Draw a training set, a test set and the generating truth.
    Simulate,
    /// Run one or more chains on the training set.
    Fit,
    /// Posterior predictive intervals for the test rows.
    Predict,
    /// Estimation and prediction measures of a fitted chain.
    Evaluate,
    /// Traces, autocorrelation and effective sample sizes.
    Diagnose,
    /// Simulate, fit and evaluate many replicates.
    ReplicateStudy,
    /// Factorial sensitivity study over prior constants.
    Sweep,
}

impl From<Command> for Verb {
    fn from(c: Command) -> Verb {
        match c {
            Command::Simulate => Verb::Simulate,
            Command::Fit => Verb::Fit,
            Command::Predict => Verb::Predict,
            Command::Evaluate => Verb::Evaluate,
            Command::Diagnose => Verb::Diagnose,
            Command::ReplicateStudy => Verb::ReplicateStudy,
            Command::Sweep => Verb::Sweep,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = cli.config.as_deref().map(RunConfig::load).transpose().and_then(|cfg| {
        let mut cfg = cfg.unwrap_or_default();
        cfg.seed = cli.seed.or(cfg.seed);
        cfg.out = cli.out.clone().or(cfg.out);
        cfg.chains = cli.chains.or(cfg.chains);
        cfg.threads = cli.threads.or(cfg.threads);
        run(cli.verb.into(), &cfg)
    });
    match result {
        Ok(summary) => {
            let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
            // a closed pipe on stdout is not a failure of the run
            let _ = writeln!(std::io::stdout(), "{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", error_json(&e));
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
