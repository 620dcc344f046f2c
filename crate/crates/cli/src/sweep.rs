//! Two-level full factorial over five pairs of prior constants, scored by
//! held-out prediction error.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde_json::{json, Value};

use bsmrmr::eval::prediction_errors;
use bsmrmr::io::write_atomic;
use bsmrmr::{run_chain, FixedParameters, Hyperparameters, MixedResponseDataset, Purpose, Result, RngStream};

use crate::commands::{load_test, load_train, simulated};
use crate::config::RunConfig;

pub const N_FACTORS: usize = 5;

/// One run of the factorial. `index` is 1-based; the pair `(a1, a2)` varies
/// fastest and `(sigma0, sigma1)` slowest.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Design {
    pub index: usize,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
    pub a5: f64,
    pub a6: f64,
    pub alpha: f64,
    pub lambda: f64,
    pub sigma0: f64,
    pub sigma1: f64,
}

impl Design {
    /// Copies the design's constants over `base`. `alpha` is the shape of
    /// the σ_τ² prior.
    pub fn apply(&self, base: &Hyperparameters) -> Hyperparameters {
        Hyperparameters {
            a1: self.a1,
            a2: self.a2,
            a3: self.a3,
            a4: self.a4,
            a5: self.a5,
            a6: self.a6,
            sigma_tau_shape: self.alpha,
            lambda: self.lambda,
            sigma0: self.sigma0,
            sigma1: self.sigma1,
            ..base.clone()
        }
    }
}

/// All `2⁵ = 32` designs for `p` predictors and `q` responses.
pub fn factorial_designs(p: usize, q: usize) -> Vec<Design> {
    let (p, q) = (p as f64, q as f64);
    let edges = (q * (q - 1.0) / 2.0).max(1.0);
    (0..1usize << N_FACTORS)
        .map(|bits| {
            let level = |f: usize| bits >> f & 1 == 1;
            let (a1, a2) = if level(0) { (2.0, 2.0) } else { (1.0, 1.0) };
            let (a3, a4) = if level(1) { (p, p) } else { (2.0 * p, p) };
            let (a5, a6) = if level(2) { (q, q) } else { (q, edges) };
            let (alpha, lambda) = if level(3) { (q, q) } else { (q / 2.0, q) };
            let (sigma0, sigma1) = if level(4) { (0.2, 2.0) } else { (0.1, 3.0) };
            Design {
                index: bits + 1,
                a1,
                a2,
                a3,
                a4,
                a5,
                a6,
                alpha,
                lambda,
                sigma0,
                sigma1,
            }
        })
        .collect()
}

/// Splits a seed-shuffled row order into `k` contiguous blocks whose sizes
/// differ by at most one.
pub fn cv_folds(n: usize, k: usize, rng: &mut RngStream) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = n / k + usize::from(f < n % k);
        folds.push(order[start..start + len].to_vec());
        start += len;
    }
    folds
}

struct Split {
    train: MixedResponseDataset,
    held_out: MixedResponseDataset,
}

fn splits(cfg: &RunConfig) -> Result<Vec<Split>> {
    let (train, test) = if cfg.train.is_some() {
        let train = load_train(cfg)?;
        let test = if cfg.test.is_some() {
            Some(load_test(cfg)?)
        } else {
            None
        };
        (train, test)
    } else {
        let sim = simulated(cfg)?;
        (sim.train, Some(sim.test))
    };
    match cfg.cv_folds.unwrap_or(0) {
        0 => {
            let held_out =
                test.ok_or_else(|| bsmrmr::Error::Schema("sweep without cv_folds needs a test set".into()))?;
            Ok(vec![Split { train, held_out }])
        }
        k => {
            if k > train.n() {
                return Err(bsmrmr::Error::Schema(format!(
                    "cv_folds = {k} exceeds the {} training rows",
                    train.n()
                )));
            }
            let mut rng = RngStream::for_purpose(cfg.seed(), Purpose::CrossValidation, 0);
            let folds = cv_folds(train.n(), k, &mut rng);
            folds
                .iter()
                .map(|held| {
                    let mut rest: Vec<usize> = (0..train.n()).filter(|i| !held.contains(i)).collect();
                    rest.sort_unstable();
                    Ok(Split {
                        train: train.select_rows(&rest)?,
                        held_out: train.select_rows(held)?,
                    })
                })
                .collect()
        }
    }
}

fn mean_se(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, None);
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, Some((ss / (n - 1.0)).sqrt() / n.sqrt()))
}

pub fn cmd_sweep(cfg: &RunConfig) -> Result<Value> {
    let splits = splits(cfg)?;
    let first = &splits[0].train;
    let base = cfg.hyperparameters(first.q())?;
    let designs = factorial_designs(first.p(), first.q());
    let n_splits = splits.len();
    let seed = cfg.seed();

    let tasks: Vec<(usize, usize)> = (0..designs.len())
        .flat_map(|d| (0..n_splits).map(move |s| (d, s)))
        .collect();
    let scores: Vec<Result<[f64; 3]>> = tasks
        .par_iter()
        .map(|&(d, s)| {
            let hyper = designs[d].apply(&base);
            hyper.validate()?;
            let rng = RngStream::for_purpose(seed, Purpose::Sweep, (d * n_splits + s) as u32);
            let split = &splits[s];
            let chain = run_chain(&split.train, &hyper, &FixedParameters::default(), rng).map_err(|e| e.source)?;
            let (n, p, me) = prediction_errors(&chain, &split.held_out)?;
            Ok([n, p, me])
        })
        .collect();
    let scores = scores.into_iter().collect::<Result<Vec<_>>>()?;

    let mut csv = String::from(
        "design,a1,a2,a3,a4,a5,a6,alpha,lambda,sigma0,sigma1,folds,RMSE(N),RMSE(N)_se,RMSE(P),RMSE(P)_se,ME,ME_se\n",
    );
    for (d, design) in designs.iter().enumerate() {
        let runs = &scores[d * n_splits..(d + 1) * n_splits];
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            design.index,
            design.a1,
            design.a2,
            design.a3,
            design.a4,
            design.a5,
            design.a6,
            design.alpha,
            design.lambda,
            design.sigma0,
            design.sigma1,
            n_splits
        ));
        for c in 0..3 {
            let column: Vec<f64> = runs.iter().map(|r| r[c]).collect();
            let (mean, se) = mean_se(&column);
            csv.push_str(&format!(",{mean:.4}"));
            match se {
                Some(se) => csv.push_str(&format!(",{se:.4}")),
                None => csv.push(','),
            }
        }
        csv.push('\n');
    }
    let path = cfg.out_dir().join("sweep.csv");
    write_atomic(&path, csv.as_bytes())?;
    Ok(json!({
        "command": "sweep",
        "seed": seed,
        "designs": designs.len(),
        "folds": n_splits,
        "table": path.display().to_string(),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factorial_grid() {
        let d = factorial_designs(20, 6);
        assert_eq!(d.len(), 32);
        assert_eq!(
            (d[0].a1, d[0].a3, d[0].a6, d[0].alpha, d[0].sigma0),
            (1.0, 40.0, 15.0, 3.0, 0.1)
        );
        assert_eq!((d[1].a1, d[1].a2, d[1].a3), (2.0, 2.0, 40.0));
        assert_eq!((d[2].a3, d[2].a4), (20.0, 20.0));
        assert_eq!((d[4].a5, d[4].a6), (6.0, 6.0));
        assert_eq!(d[8].alpha, 6.0);
        assert_eq!((d[16].sigma0, d[16].sigma1), (0.2, 2.0));
        assert_eq!(d[31].index, 32);
        let mut seen: Vec<String> = d
            .iter()
            .map(|x| format!("{x:?}").split_once(',').unwrap().1.to_string())
            .collect();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 32);
    }

    #[test]
    fn folds_partition_rows() {
        let mut rng = RngStream::new(3, 0);
        let folds = cv_folds(23, 10, &mut rng);
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
        assert!(folds.iter().all(|f| f.len() == 2 || f.len() == 3));
    }
}
