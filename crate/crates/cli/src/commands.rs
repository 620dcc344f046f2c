//! One function per CLI verb. Each returns a JSON summary for standard
//! output; artifacts go under the configured output directory.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use bsmrmr::diagnostics::{acf, effective_sample_size, export_traces, TraceSeries};
use bsmrmr::eval::{evaluate_fit, prediction_errors, replicate_study, Metrics, ReplicateSeeding};
use bsmrmr::gibbs::{posterior_predict, ChainError};
use bsmrmr::io::{
    load_dataset, read_chain, read_json, schema_path_for, write_atomic, write_chain, write_chain_csv, write_dataset,
    write_json,
};
use bsmrmr::synth::{generate_dataset, SimulatedData, Truth};
use bsmrmr::{run_chain, FixedParameters, MixedResponseDataset, PosteriorChain, Purpose, Result, RngStream};

use crate::config::RunConfig;

const DEFAULT_MAX_LAG: usize = 40;

pub(crate) fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn rows_u8(m: &DMatrix<u8>) -> Vec<Vec<u8>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

pub(crate) fn load_train(cfg: &RunConfig) -> Result<MixedResponseDataset> {
    let csv = cfg.require(&cfg.train, "train")?;
    let schema = cfg.schema.clone().unwrap_or_else(|| schema_path_for(csv));
    load_dataset(csv, &schema)
}

pub(crate) fn load_test(cfg: &RunConfig) -> Result<MixedResponseDataset> {
    let csv = cfg.require(&cfg.test, "test")?;
    let schema = cfg.test_schema.clone().unwrap_or_else(|| schema_path_for(csv));
    load_dataset(csv, &schema)
}

fn chain_path(cfg: &RunConfig) -> PathBuf {
    cfg.chain
        .clone()
        .unwrap_or_else(|| cfg.out_dir().join("chain_1").join("chain.bin"))
}

/// The simulated replicate `simulate` writes; `sweep` reuses it when no
/// data files are configured.
pub(crate) fn simulated(cfg: &RunConfig) -> Result<SimulatedData> {
    let scenario = cfg.scenario()?;
    let mut rng = RngStream::for_purpose(cfg.seed(), Purpose::Simulate, 0);
    generate_dataset(&scenario, &mut rng)
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<Value> {
    let sim = simulated(cfg)?;
    let out = cfg.out_dir();
    let train = out.join("train.csv");
    let test = out.join("test.csv");
    let truth = out.join("truth.json");
    write_dataset(&sim.train, &train, &schema_path_for(&train))?;
    write_dataset(&sim.test, &test, &schema_path_for(&test))?;
    write_json(&truth, &sim.truth)?;
    let max_count = sim.train.z.iter().chain(sim.test.z.iter()).max().copied().unwrap_or(0);
    Ok(json!({
        "command": "simulate",
        "seed": cfg.seed(),
        "train": display(&train),
        "test": display(&test),
        "truth": display(&truth),
        "n_train": sim.train.n(),
        "n_test": sim.test.n(),
        "max_count": max_count,
    }))
}

#[derive(Serialize)]
struct ChainSummary {
    chain: usize,
    path: String,
    seed: u64,
    stream: u64,
    n_draws: usize,
    digest: String,
    truncated_at: Option<usize>,
    error: Option<String>,
    acceptance: Vec<Option<f64>>,
    intercept_median: Option<Vec<f64>>,
    b_median: Option<Vec<Vec<f64>>>,
    b_support: Option<Vec<Vec<u8>>>,
    omega_median: Option<Vec<Vec<f64>>>,
    edge_support: Option<Vec<Vec<u8>>>,
}

impl ChainSummary {
    fn new(index: usize, path: &Path, chain: &PosteriorChain, error: Option<String>) -> Self {
        ChainSummary {
            chain: index,
            path: display(path),
            seed: chain.seed,
            stream: chain.stream,
            n_draws: chain.len(),
            digest: chain.digest(),
            truncated_at: chain.truncated_at,
            error,
            acceptance: chain.acceptance.clone(),
            intercept_median: chain
                .median_intercept()
                .map(|v: DVector<f64>| v.iter().copied().collect()),
            b_median: chain.median_b().as_ref().map(rows),
            b_support: chain.b_support().as_ref().map(rows_u8),
            omega_median: chain.median_omega().as_ref().map(rows),
            edge_support: chain.edge_support().as_ref().map(rows_u8),
        }
    }
}

pub fn cmd_fit(cfg: &RunConfig) -> Result<Value> {
    let data = load_train(cfg)?;
    let hyper = cfg.hyperparameters(data.q())?;
    let seed = cfg.seed();
    let runs: Vec<std::result::Result<PosteriorChain, ChainError>> = (0..cfg.n_chains())
        .into_par_iter()
        .map(|i| {
            let rng = RngStream::for_purpose(seed, Purpose::Chain, i as u32);
            run_chain(&data, &hyper, &FixedParameters::default(), rng)
        })
        .collect();

    let out = cfg.out_dir();
    let mut summaries = Vec::with_capacity(runs.len());
    let mut first_error = None;
    for (i, run) in runs.into_iter().enumerate() {
        let dir = out.join(format!("chain_{}", i + 1));
        let path = dir.join("chain.bin");
        let (chain, error) = match run {
            Ok(c) => (c, None),
            Err(e) => {
                let context = format!("failed at sweep {} in {:?}: {}", e.sweep, e.step, e.source);
                (*e.partial, Some((context, e.source)))
            }
        };
        write_chain(&path, &chain)?;
        if let Some(thin) = cfg.thin {
            write_chain_csv(&dir.join("chain.csv"), &chain, thin)?;
        }
        summaries.push(ChainSummary::new(
            i + 1,
            &path,
            &chain,
            error.as_ref().map(|(c, _)| c.clone()),
        ));
        if first_error.is_none() {
            first_error = error.map(|(_, e)| e);
        }
    }
    let summary = json!({
        "command": "fit",
        "seed": seed,
        "n": data.n(),
        "p": data.p(),
        "layout": { "l": data.layout().l, "m": data.layout().m, "k": data.layout().k },
        "hyperparameters": hyper,
        "chains": summaries,
    });
    write_json(&out.join("fit_summary.json"), &summary)?;
    match first_error {
        None => Ok(summary),
        Some(e) => Err(e),
    }
}

pub fn cmd_predict(cfg: &RunConfig) -> Result<Value> {
    let chain = read_chain(&chain_path(cfg))?;
    let test = load_test(cfg)?;
    let mode = cfg.mode()?;
    let mut rng = RngStream::for_purpose(cfg.seed(), Purpose::Predict, 0);
    let mut out = String::from("row,response,kind,lower,median,upper,class\n");
    for i in 0..test.n() {
        let x = test.x.row(i).transpose();
        let pred = posterior_predict(&chain, &x, mode, &mut rng)?;
        let mut classes = pred.binary_class.iter();
        for (j, s) in pred.responses.iter().enumerate() {
            let class = match s.kind {
                bsmrmr::model::ResponseKind::Binary => classes.next().map(|c| c.to_string()).unwrap_or_default(),
                _ => String::new(),
            };
            out.push_str(&format!(
                "{},{},{:?},{:?},{:?},{:?},{class}\n",
                i + 1,
                j + 1,
                s.kind,
                s.lower,
                s.median,
                s.upper
            ));
        }
    }
    let path = cfg.out_dir().join("predictions.csv");
    write_atomic(&path, out.as_bytes())?;
    Ok(json!({
        "command": "predict",
        "mode": cfg.prediction_mode.clone().unwrap_or_else(|| "mean-path".into()),
        "rows": test.n(),
        "chain_digest": chain.digest(),
        "predictions": display(&path),
    }))
}

fn metrics_csv(m: &Metrics) -> String {
    let mut out = String::from("measure,value\n");
    for (name, v) in Metrics::NAMES.iter().zip(m.to_array()) {
        out.push_str(&format!("{name},{v:?}\n"));
    }
    out
}

pub fn cmd_evaluate(cfg: &RunConfig) -> Result<Value> {
    let chain = read_chain(&chain_path(cfg))?;
    let test = load_test(cfg)?;
    let metrics = match &cfg.truth {
        Some(path) => {
            let truth: Truth = read_json(path)?;
            evaluate_fit(&chain, &test, &truth)?
        }
        None => {
            let (n, p, me) = prediction_errors(&chain, &test)?;
            Metrics::from_array([f64::NAN, f64::NAN, f64::NAN, f64::NAN, n, p, me])
        }
    };
    let out = cfg.out_dir();
    let csv = out.join("evaluation.csv");
    let report = out.join("evaluation.json");
    write_atomic(&csv, metrics_csv(&metrics).as_bytes())?;
    let summary = json!({
        "command": "evaluate",
        "chain_digest": chain.digest(),
        "metrics": Metrics::NAMES.iter().zip(metrics.to_array())
            .map(|(n, v)| (n.to_string(), json!(v)))
            .collect::<serde_json::Map<_, _>>(),
    });
    write_json(&report, &summary)?;
    Ok(summary)
}

fn default_trace_ids(chain: &PosteriorChain) -> Vec<String> {
    let mut ids = vec!["B[1,1]".to_string(), "Omega[1,1]".to_string()];
    if chain.q() > 1 {
        ids.push("Omega[1,2]".into());
    }
    ids.push("sigma_tau2".into());
    ids
}

pub fn cmd_diagnose(cfg: &RunConfig) -> Result<Value> {
    let chain = read_chain(&chain_path(cfg))?;
    let ids = cfg.trace_params.clone().unwrap_or_else(|| default_trace_ids(&chain));
    let out = cfg.out_dir();
    let traces = out.join("traces.csv");
    export_traces(&chain, &ids, &traces)?;
    if let Some(thin) = cfg.thin {
        write_chain_csv(&out.join("chain.csv"), &chain, thin)?;
    }
    let max_lag = cfg
        .max_lag
        .unwrap_or(DEFAULT_MAX_LAG)
        .min(chain.len().saturating_sub(1));
    let mut params = Vec::with_capacity(ids.len());
    for id in &ids {
        let series = TraceSeries::from_chain(&chain, id)?;
        let n = series.len() as f64;
        let mean = series.values.iter().sum::<f64>() / n;
        let var = series.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        let ess = effective_sample_size(&series)?;
        params.push(json!({
            "id": id,
            "mean": mean,
            "sd": var.sqrt(),
            "ess": ess.ess,
            "degenerate": ess.degenerate,
            "acf": acf(&series, max_lag)?,
        }));
    }
    let summary = json!({
        "command": "diagnose",
        "chain_digest": chain.digest(),
        "n_draws": chain.len(),
        "acceptance": chain.acceptance,
        "traces": display(&traces),
        "parameters": params,
    });
    write_json(&out.join("diagnostics.json"), &summary)?;
    Ok(summary)
}

pub fn cmd_replicate_study(cfg: &RunConfig) -> Result<Value> {
    let scenario = cfg.scenario()?;
    let hyper = cfg.hyperparameters(scenario.q())?;
    let seeding = if cfg.shared_seed.unwrap_or(false) {
        ReplicateSeeding::Shared
    } else {
        ReplicateSeeding::Independent
    };
    let report = replicate_study(&scenario, cfg.replicates.unwrap_or(10), &hyper, seeding)?;
    let out = cfg.out_dir();
    write_json(&out.join("report.json"), &report)?;
    write_atomic(&out.join("table.csv"), report.table_csv("BS-MRMR").as_bytes())?;
    write_atomic(&out.join("replicates.csv"), report.replicates_csv().as_bytes())?;
    Ok(json!({
        "command": "replicate-study",
        "seed": cfg.seed(),
        "replicates": report.n_replicates,
        "mean": Metrics::NAMES.iter().zip(report.mean.to_array())
            .map(|(n, v)| (n.to_string(), json!(v)))
            .collect::<serde_json::Map<_, _>>(),
        "report": display(&out.join("report.json")),
    }))
}
