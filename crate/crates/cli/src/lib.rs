//! Command-line surface: configuration, the seven verbs and error
//! reporting.

pub mod commands;
pub mod config;
pub mod sweep;

use serde_json::{json, Value};

use bsmrmr::{Error, Result};

pub use commands::{cmd_diagnose, cmd_evaluate, cmd_fit, cmd_predict, cmd_replicate_study, cmd_simulate};
pub use config::RunConfig;
pub use sweep::{cmd_sweep, factorial_designs, Design};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verb {
    Simulate,
    Fit,
    Predict,
    Evaluate,
    Diagnose,
    ReplicateStudy,
    Sweep,
}

/// Runs a verb, on a dedicated pool when `threads` is set.
pub fn run(verb: Verb, cfg: &RunConfig) -> Result<Value> {
    cfg.validate()?;
    let go = || match verb {
        Verb::Simulate => cmd_simulate(cfg),
        Verb::Fit => cmd_fit(cfg),
        Verb::Predict => cmd_predict(cfg),
        Verb::Evaluate => cmd_evaluate(cfg),
        Verb::Diagnose => cmd_diagnose(cfg),
        Verb::ReplicateStudy => cmd_replicate_study(cfg),
        Verb::Sweep => cmd_sweep(cfg),
    };
    match cfg.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::Schema(format!("cannot start {t} worker threads: {e}")))?
            .install(go),
        None => go(),
    }
}

/// 1 for numerical failures, 2 for input, configuration and I/O problems.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_numerical() {
        1
    } else {
        2
    }
}

pub fn error_json(err: &Error) -> Value {
    let kind = match err {
        _ if err.is_numerical() => "numerical",
        Error::Io { .. } => "io",
        Error::Format { .. } | Error::Schema(_) => "config",
        _ => "data",
    };
    let mut v = json!({
        "error": kind,
        "message": err.to_string(),
        "exit_code": exit_code(err),
    });
    if let Error::Io { path, .. } | Error::Format { path, .. } = err {
        v["path"] = json!(path.display().to_string());
    }
    v
}
