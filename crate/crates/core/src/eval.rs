//! Loss measures, selection error, prediction error and replicate studies.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gibbs::{predict_rows, run_chain, FixedParameters, PosteriorChain};
use crate::model::{Hyperparameters, MixedResponseDataset};
use crate::rng::{Purpose, RngStream};
use crate::synth::{generate_dataset, SimulationScenario, Truth};

fn same_shape<A, B>(a: &DMatrix<A>, b: &DMatrix<B>) -> Result<()>
where
    A: nalgebra::Scalar,
    B: nalgebra::Scalar,
{
    if a.shape() != b.shape() {
        return Err(Error::Dimension(format!(
            "shapes differ: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

/// Root-mean-square difference over all entries.
pub fn loss_matrix(truth: &DMatrix<f64>, est: &DMatrix<f64>) -> Result<f64> {
    same_shape(truth, est)?;
    if truth.is_empty() {
        return Err(Error::Dimension("loss of an empty matrix".into()));
    }
    let ss: f64 = truth.iter().zip(est.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((ss / truth.len() as f64).sqrt())
}

/// False positives plus false negatives over the number of entries.
pub fn fsl(truth: &DMatrix<u8>, est: &DMatrix<u8>) -> Result<f64> {
    same_shape(truth, est)?;
    if truth.is_empty() {
        return Err(Error::Dimension("selection loss of an empty mask".into()));
    }
    let wrong = truth
        .iter()
        .zip(est.iter())
        .filter(|(a, b)| (**a != 0) != (**b != 0))
        .count();
    Ok(wrong as f64 / truth.len() as f64)
}

/// Selection loss over the strict upper triangle of two square masks.
pub fn fsl_offdiag(truth: &DMatrix<u8>, est: &DMatrix<u8>) -> Result<f64> {
    same_shape(truth, est)?;
    let q = truth.nrows();
    if !truth.is_square() || q < 2 {
        return Err(Error::Dimension(format!(
            "off-diagonal selection loss needs a square mask with q >= 2, got {:?}",
            truth.shape()
        )));
    }
    let mut wrong = 0;
    for i in 0..q {
        for j in i + 1..q {
            wrong += usize::from((truth[(i, j)] != 0) != (est[(i, j)] != 0));
        }
    }
    Ok(wrong as f64 / (q * (q - 1) / 2) as f64)
}

pub fn rmse(y: &[f64], yhat: &[f64]) -> Result<f64> {
    if y.len() != yhat.len() || y.is_empty() {
        return Err(Error::Dimension(format!(
            "rmse of lengths {} and {}",
            y.len(),
            yhat.len()
        )));
    }
    let ss: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((ss / y.len() as f64).sqrt())
}

/// Error rate of the rule `1{γ̂ > 0.5}`; a tie at 0.5 predicts 0.
pub fn misclassification(y: &[u8], gamma_hat: &[f64]) -> Result<f64> {
    if y.len() != gamma_hat.len() || y.is_empty() {
        return Err(Error::Dimension(format!(
            "misclassification of lengths {} and {}",
            y.len(),
            gamma_hat.len()
        )));
    }
    let wrong = y
        .iter()
        .zip(gamma_hat)
        .filter(|(a, g)| **a != u8::from(**g > 0.5))
        .count();
    Ok(wrong as f64 / y.len() as f64)
}

/// Fraction of values inside their closed interval.
pub fn interval_coverage(truth: &[f64], intervals: &[(f64, f64)]) -> Result<f64> {
    if truth.len() != intervals.len() || truth.is_empty() {
        return Err(Error::Dimension(format!(
            "coverage of {} values and {} intervals",
            truth.len(),
            intervals.len()
        )));
    }
    let hit = truth
        .iter()
        .zip(intervals)
        .filter(|(t, (lo, hi))| lo <= *t && *t <= hi)
        .count();
    Ok(hit as f64 / truth.len() as f64)
}

/// The seven study measures for one fit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub loss_b: f64,
    pub loss_omega: f64,
    pub fsl_b: f64,
    pub fsl_omega: f64,
    pub rmse_continuous: f64,
    pub rmse_count: f64,
    pub misclass_rate: f64,
}

impl Metrics {
    pub const NAMES: [&'static str; 7] = ["L(B)", "L(Omega)", "FSL(B)", "FSL(Omega)", "RMSE(N)", "RMSE(P)", "ME"];

    pub fn to_array(self) -> [f64; 7] {
        [
            self.loss_b,
            self.loss_omega,
            self.fsl_b,
            self.fsl_omega,
            self.rmse_continuous,
            self.rmse_count,
            self.misclass_rate,
        ]
    }

    pub fn from_array(a: [f64; 7]) -> Self {
        Metrics {
            loss_b: a[0],
            loss_omega: a[1],
            fsl_b: a[2],
            fsl_omega: a[3],
            rmse_continuous: a[4],
            rmse_count: a[5],
            misclass_rate: a[6],
        }
    }
}

/// Point predictions of a test set plus the errors against its responses.
/// Prediction errors pool every response of a block. A block with no
/// responses reports NaN.
pub fn prediction_errors(chain: &PosteriorChain, test: &MixedResponseDataset) -> Result<(f64, f64, f64)> {
    let pred = predict_rows(chain, &test.x)?;
    let lay = test.layout();
    let n = test.n();
    let pooled = |cols: std::ops::Range<usize>, obs: &dyn Fn(usize, usize) -> f64| -> Result<f64> {
        if cols.is_empty() {
            return Ok(f64::NAN);
        }
        let mut y = Vec::with_capacity(n * cols.len());
        let mut yhat = Vec::with_capacity(n * cols.len());
        for j in cols {
            for i in 0..n {
                y.push(obs(i, j));
                yhat.push(pred[(i, j)]);
            }
        }
        rmse(&y, &yhat)
    };
    let rmse_n = pooled(0..lay.l, &|i, j| test.response(i, j))?;
    let rmse_p = pooled(lay.l..lay.l + lay.m, &|i, j| test.response(i, j))?;
    let me = if lay.k == 0 {
        f64::NAN
    } else {
        let mut y = Vec::with_capacity(n * lay.k);
        let mut g = Vec::with_capacity(n * lay.k);
        for j in lay.l + lay.m..lay.q() {
            for i in 0..n {
                y.push(test.response(i, j) as u8);
                g.push(pred[(i, j)]);
            }
        }
        misclassification(&y, &g)?
    };
    Ok((rmse_n, rmse_p, me))
}

/// All seven measures for a fitted chain against the generating truth.
pub fn evaluate_fit(chain: &PosteriorChain, test: &MixedResponseDataset, truth: &Truth) -> Result<Metrics> {
    let empty = || Error::Dimension("cannot evaluate an empty chain".into());
    let b_hat = chain.median_b().ok_or_else(empty)?;
    let omega_hat = chain.median_omega().ok_or_else(empty)?;
    let b_support = chain.b_support().ok_or_else(empty)?;
    let edges = chain.edge_support().ok_or_else(empty)?;
    let (rmse_continuous, rmse_count, misclass_rate) = prediction_errors(chain, test)?;
    Ok(Metrics {
        loss_b: loss_matrix(&truth.b, &b_hat)?,
        loss_omega: loss_matrix(&truth.omega, &omega_hat)?,
        fsl_b: fsl(&truth.support, &b_support)?,
        fsl_omega: if truth.omega.nrows() > 1 {
            fsl_offdiag(&truth.edge_support(), &edges)?
        } else {
            f64::NAN
        },
        rmse_continuous,
        rmse_count,
        misclass_rate,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateResult {
    pub replicate: usize,
    pub data_stream: u64,
    pub chain_stream: u64,
    pub chain_digest: String,
    pub metrics: Metrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub scenario: SimulationScenario,
    pub n_replicates: usize,
    pub replicates: Vec<ReplicateResult>,
    pub mean: Metrics,
    /// Standard error of the mean (sample standard deviation over √R).
    pub std_error: Metrics,
}

impl EvaluationReport {
    pub fn from_replicates(scenario: SimulationScenario, replicates: Vec<ReplicateResult>) -> Result<Self> {
        if replicates.is_empty() {
            return Err(Error::Domain("a report needs at least one replicate".into()));
        }
        let r = replicates.len() as f64;
        let mut mean = [0.0; 7];
        let mut se = [0.0; 7];
        for (c, m) in mean.iter_mut().enumerate() {
            *m = replicates.iter().map(|x| x.metrics.to_array()[c]).sum::<f64>() / r;
        }
        if replicates.len() > 1 {
            for c in 0..7 {
                let ss: f64 = replicates
                    .iter()
                    .map(|x| (x.metrics.to_array()[c] - mean[c]).powi(2))
                    .sum();
                se[c] = (ss / (r - 1.0)).sqrt() / r.sqrt();
            }
        }
        Ok(EvaluationReport {
            scenario,
            n_replicates: replicates.len(),
            replicates,
            mean: Metrics::from_array(mean),
            std_error: Metrics::from_array(se),
        })
    }

    /// One-row summary table, each cell `mean (se)`.
    pub fn table_csv(&self, method: &str) -> String {
        let mut out = String::from("method,scenario,pattern");
        for n in Metrics::NAMES {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        out.push_str(&format!(
            "{method},{},{}",
            self.scenario.omega_id, self.scenario.coeff_id
        ));
        for (m, s) in self.mean.to_array().iter().zip(self.std_error.to_array()) {
            out.push_str(&format!(",{m:.4} ({s:.4})"));
        }
        out.push('\n');
        out
    }

    /// Per-replicate measures.
    pub fn replicates_csv(&self) -> String {
        let mut out = String::from("replicate,chain_digest");
        for n in Metrics::NAMES {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for r in &self.replicates {
            out.push_str(&format!("{},{}", r.replicate + 1, r.chain_digest));
            for v in r.metrics.to_array() {
                out.push_str(&format!(",{v:?}"));
            }
            out.push('\n');
        }
        out
    }
}

/// How replicate streams are derived from the root seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReplicateSeeding {
    /// Replicate `r` uses stream index `r`.
    Independent,
    /// Every replicate uses stream index 0 (identical replicates).
    Shared,
}

/// Simulates, fits and evaluates `n_replicates` independent replicates in
/// parallel. Results do not depend on the thread count.
pub fn replicate_study(
    scenario: &SimulationScenario,
    n_replicates: usize,
    hyper: &Hyperparameters,
    seeding: ReplicateSeeding,
) -> Result<EvaluationReport> {
    scenario.validate()?;
    hyper.validate()?;
    let results: Vec<Result<ReplicateResult>> = (0..n_replicates)
        .into_par_iter()
        .map(|r| {
            let idx = match seeding {
                ReplicateSeeding::Independent => r as u32,
                ReplicateSeeding::Shared => 0,
            };
            let mut data_rng = RngStream::for_purpose(scenario.seed, Purpose::ReplicateData, idx);
            let chain_rng = RngStream::for_purpose(scenario.seed, Purpose::ReplicateChain, idx);
            let (data_stream, chain_stream) = (data_rng.stream(), chain_rng.stream());
            let sim = generate_dataset(scenario, &mut data_rng)?;
            let chain = run_chain(&sim.train, hyper, &FixedParameters::default(), chain_rng).map_err(|e| e.source)?;
            let metrics = evaluate_fit(&chain, &sim.test, &sim.truth)?;
            Ok(ReplicateResult {
                replicate: r,
                data_stream,
                chain_stream,
                chain_digest: chain.digest(),
                metrics,
            })
        })
        .collect();
    let replicates = results.into_iter().collect::<Result<Vec<_>>>()?;
    EvaluationReport::from_replicates(scenario.clone(), replicates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn loss_cases() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(loss_matrix(&a, &a).unwrap(), 0.0);
        assert_abs_diff_eq!(loss_matrix(&a, &a.add_scalar(1.0)).unwrap(), 1.0, epsilon = 1e-15);
        let b = DMatrix::from_row_slice(2, 2, &[2.0, 2.0, 3.0, 6.0]);
        assert_abs_diff_eq!(loss_matrix(&a, &b).unwrap(), 1.25f64.sqrt(), epsilon = 1e-15);
        assert!(loss_matrix(&a, &DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn fsl_cases() {
        let t = DMatrix::from_fn(20, 6, |i, j| u8::from((i + j) % 3 == 0));
        assert_eq!(fsl(&t, &t).unwrap(), 0.0);
        assert_eq!(fsl(&t, &t.map(|v| 1 - v)).unwrap(), 1.0);
        let mut e = t.clone();
        for (i, j) in [(0, 0), (4, 2), (19, 5)] {
            e[(i, j)] = 1 - e[(i, j)];
        }
        assert_abs_diff_eq!(fsl(&t, &e).unwrap(), 0.025, epsilon = 1e-15);
    }

    #[test]
    fn offdiag_fsl_ignores_diagonal() {
        let t = DMatrix::from_row_slice(3, 3, &[1, 1, 0, 1, 1, 0, 0, 0, 1]);
        let e = DMatrix::from_row_slice(3, 3, &[0, 1, 1, 1, 0, 0, 1, 0, 0]);
        assert_abs_diff_eq!(fsl_offdiag(&t, &e).unwrap(), 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn prediction_error_cases() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(rmse(&[0.0, 2.0], &[0.0, 0.0]).unwrap(), 2f64.sqrt(), epsilon = 1e-15);
        assert_eq!(misclassification(&[1], &[0.6]).unwrap(), 0.0);
        assert_eq!(misclassification(&[1, 0], &[0.5, 0.5]).unwrap(), 0.5);
        assert!(rmse(&[], &[]).is_err());
    }

    #[test]
    fn coverage_cases() {
        let t = vec![0.0; 20];
        let all = vec![(-1.0, 1.0); 20];
        assert_eq!(interval_coverage(&t, &all).unwrap(), 1.0);
        assert_eq!(interval_coverage(&t, &vec![(1.0, 2.0); 20]).unwrap(), 0.0);
        let mut some = all.clone();
        some[3] = (0.5, 1.0);
        assert_eq!(interval_coverage(&t, &some).unwrap(), 0.95);
    }

    #[test]
    fn report_aggregates() {
        let s = SimulationScenario::standard(1, 1, 0).unwrap();
        let mk = |r, v: f64| ReplicateResult {
            replicate: r,
            data_stream: 0,
            chain_stream: 0,
            chain_digest: String::new(),
            metrics: Metrics::from_array([v; 7]),
        };
        let rep = EvaluationReport::from_replicates(s.clone(), vec![mk(0, 1.0), mk(1, 3.0)]).unwrap();
        assert_eq!(rep.mean.loss_b, 2.0);
        assert_abs_diff_eq!(rep.std_error.loss_b, 1.0, epsilon = 1e-15);
        let same = EvaluationReport::from_replicates(s, vec![mk(0, 0.7), mk(1, 0.7)]).unwrap();
        assert_eq!(same.std_error.misclass_rate, 0.0);
        assert!(same.table_csv("bsmrmr").contains("0.7000 (0.0000)"));
    }
}
