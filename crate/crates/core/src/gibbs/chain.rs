//! Sweep driver and the retained-draw container.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{FixedParameters, Sampler};
use crate::diagnostics::quantile;
use crate::error::{Error, Result};
use crate::model::{effective_coefficients, Hyperparameters, MixedResponseDataset, ModelState, ResponseLayout};
use crate::rng::RngStream;

/// Which update of a sweep was running.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Step {
    Latent,
    GaussianVariance,
    Intercept,
    CoefficientGroup(usize),
    Tau(usize),
    SparsityProbs,
    SigmaTau2,
    Precision,
    EmUpdate,
    Support,
}

/// A numerical failure part-way through a chain. `partial` holds every
/// draw retained before the failing sweep.
#[derive(Debug, thiserror::Error)]
#[error("sweep {sweep}, {step:?}: {source}")]
pub struct ChainError {
    pub sweep: usize,
    pub step: Step,
    #[source]
    pub source: Error,
    pub partial: Box<PosteriorChain>,
}

/// Summary of one retained sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct Draw {
    pub iter: u64,
    pub intercept: DVector<f64>,
    /// Effective coefficients `B`, p×q.
    pub b: DMatrix<f64>,
    pub omega: DMatrix<f64>,
    /// Strict upper triangle of the edge indicators, row by row.
    pub edges: Vec<u8>,
    pub pi1: f64,
    pub pi2: f64,
    pub pi3: f64,
    pub sigma_tau2: f64,
    pub sigma2_gauss: DVector<f64>,
    pub d: f64,
}

impl Draw {
    pub fn from_state(iter: u64, state: &ModelState) -> Self {
        let q = state.q();
        let mut edges = Vec::with_capacity(q * q.saturating_sub(1) / 2);
        for i in 0..q {
            for j in i + 1..q {
                edges.push(state.edge_ind[(i, j)]);
            }
        }
        Draw {
            iter,
            intercept: state.intercept.clone(),
            b: effective_coefficients(state),
            omega: state.omega.as_matrix().clone(),
            edges,
            pi1: state.pi1,
            pi2: state.pi2,
            pi3: state.pi3,
            sigma_tau2: state.sigma_tau2,
            sigma2_gauss: state.sigma2_gauss.clone(),
            d: state.d,
        }
    }

    /// Flat record in the order given by [`PosteriorChain::field_names`].
    pub fn to_record(&self) -> Vec<f64> {
        let (p, q) = self.b.shape();
        let mut r = Vec::with_capacity(record_len(p, q, self.sigma2_gauss.len()));
        r.push(self.iter as f64);
        r.extend(self.intercept.iter());
        for i in 0..p {
            r.extend(self.b.row(i).iter());
        }
        for i in 0..q {
            r.extend(self.omega.row(i).iter());
        }
        r.extend(self.edges.iter().map(|&e| e as f64));
        r.extend([self.pi1, self.pi2, self.pi3, self.sigma_tau2]);
        r.extend(self.sigma2_gauss.iter());
        r.push(self.d);
        r
    }

    pub fn from_record(rec: &[f64], p: usize, layout: ResponseLayout) -> Result<Self> {
        let q = layout.q();
        let want = record_len(p, q, layout.l);
        if rec.len() != want {
            return Err(Error::Dimension(format!(
                "chain record has {} values, expected {want}",
                rec.len()
            )));
        }
        let mut it = rec.iter().copied();
        let mut take = |k: usize| -> Vec<f64> { it.by_ref().take(k).collect() };
        let iter = take(1)[0] as u64;
        let intercept = DVector::from_vec(take(q));
        let b = DMatrix::from_row_slice(p, q, &take(p * q));
        let omega = DMatrix::from_row_slice(q, q, &take(q * q));
        let edges = take(q * q.saturating_sub(1) / 2).into_iter().map(|v| v as u8).collect();
        let s = take(4);
        let sigma2_gauss = DVector::from_vec(take(layout.l));
        let d = take(1)[0];
        Ok(Draw {
            iter,
            intercept,
            b,
            omega,
            edges,
            pi1: s[0],
            pi2: s[1],
            pi3: s[2],
            sigma_tau2: s[3],
            sigma2_gauss,
            d,
        })
    }
}

pub fn record_len(p: usize, q: usize, l: usize) -> usize {
    1 + q + p * q + q * q + q * q.saturating_sub(1) / 2 + 4 + l + 1
}

/// Retained draws plus the metadata needed to reproduce them.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorChain {
    pub p: usize,
    pub layout: ResponseLayout,
    pub group_sizes: Vec<usize>,
    pub seed: u64,
    pub stream: u64,
    pub n_burnin: usize,
    pub n_iter: usize,
    pub draws: Vec<Draw>,
    /// First sweep that failed, if the chain stopped early.
    pub truncated_at: Option<usize>,
    /// Metropolis acceptance rate per latent slot (`None` for exact slots).
    pub acceptance: Vec<Option<f64>>,
}

impl PosteriorChain {
    pub fn q(&self) -> usize {
        self.layout.q()
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn record_len(&self) -> usize {
        record_len(self.p, self.q(), self.layout.l)
    }

    /// Column names of a flat draw record (1-based indices).
    pub fn field_names(&self) -> Vec<String> {
        let (p, q) = (self.p, self.q());
        let mut f = vec!["iter".to_string()];
        f.extend((1..=q).map(|j| format!("b0[{j}]")));
        for i in 1..=p {
            f.extend((1..=q).map(|j| format!("B[{i},{j}]")));
        }
        for i in 1..=q {
            f.extend((1..=q).map(|j| format!("Omega[{i},{j}]")));
        }
        for i in 1..=q {
            f.extend((i + 1..=q).map(|j| format!("edge[{i},{j}]")));
        }
        f.extend(["pi1", "pi2", "pi3", "sigma_tau2"].map(String::from));
        f.extend((1..=self.layout.l).map(|j| format!("sigma2[{j}]")));
        f.push("d".into());
        f
    }

    /// All records, little-endian f64, concatenated.
    pub fn record_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.len() * self.record_len() * 8);
        for d in &self.draws {
            for v in d.to_record() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    /// SHA-256 of the record bytes, hex encoded.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.record_bytes()))
    }

    /// Trace of one named field.
    pub fn trace(&self, field: &str) -> Option<Vec<f64>> {
        let idx = self.field_names().iter().position(|f| f == field)?;
        Some(self.draws.iter().map(|d| d.to_record()[idx]).collect())
    }

    fn elementwise<F: Fn(&Draw) -> &DMatrix<f64>>(
        &self,
        get: F,
        reduce: impl Fn(&mut [f64]) -> f64,
    ) -> Option<DMatrix<f64>> {
        let first = get(self.draws.first()?);
        let (r, c) = first.shape();
        let mut buf = vec![0.0; self.len()];
        Some(DMatrix::from_fn(r, c, |i, j| {
            for (s, d) in self.draws.iter().enumerate() {
                buf[s] = get(d)[(i, j)];
            }
            reduce(&mut buf)
        }))
    }

    /// Posterior median of `B`.
    pub fn median_b(&self) -> Option<DMatrix<f64>> {
        self.elementwise(|d| &d.b, |v| quantile(v, 0.5))
    }

    pub fn median_omega(&self) -> Option<DMatrix<f64>> {
        self.elementwise(|d| &d.omega, |v| quantile(v, 0.5))
    }

    pub fn median_intercept(&self) -> Option<DVector<f64>> {
        let q = self.q();
        let mut buf = vec![0.0; self.len()];
        (!self.is_empty()).then(|| {
            DVector::from_fn(q, |j, _| {
                for (s, d) in self.draws.iter().enumerate() {
                    buf[s] = d.intercept[j];
                }
                quantile(&mut buf, 0.5)
            })
        })
    }

    /// Fraction of draws with a non-zero coefficient, per entry.
    pub fn b_inclusion_freq(&self) -> Option<DMatrix<f64>> {
        let n = self.len() as f64;
        self.elementwise(|d| &d.b, |v| v.iter().filter(|&&x| x != 0.0).count() as f64 / n)
    }

    /// Majority-vote support of `B`.
    pub fn b_support(&self) -> Option<DMatrix<u8>> {
        self.b_inclusion_freq().map(|f| f.map(|v| u8::from(v > 0.5)))
    }

    /// Majority-vote edge set as a symmetric 0/1 matrix with zero diagonal.
    pub fn edge_support(&self) -> Option<DMatrix<u8>> {
        if self.is_empty() {
            return None;
        }
        let q = self.q();
        let n = self.len() as f64;
        let mut m = DMatrix::zeros(q, q);
        let mut k = 0;
        for i in 0..q {
            for j in i + 1..q {
                let on = self.draws.iter().filter(|d| d.edges[k] == 1).count() as f64;
                let e = u8::from(on / n > 0.5);
                m[(i, j)] = e;
                m[(j, i)] = e;
                k += 1;
            }
        }
        Some(m)
    }
}

impl Sampler<'_> {
    /// One full sweep. `sweep` is the 0-based sweep index; burn-in
    /// adaptation and EM updates depend on it.
    pub fn sweep<R: Rng + ?Sized>(
        &mut self,
        state: &mut ModelState,
        sweep: usize,
        rng: &mut R,
    ) -> std::result::Result<(), (Step, Error)> {
        self.sample_latent_xi(state, rng).map_err(|e| (Step::Latent, e))?;
        self.sample_gaussian_variances(state, rng)
            .map_err(|e| (Step::GaussianVariance, e))?;
        self.sample_intercept(state, rng).map_err(|e| (Step::Intercept, e))?;
        for g in 0..self.data.groups.n_groups() {
            self.sample_coefficient_group(g, state, rng)
                .map_err(|e| (Step::CoefficientGroup(g), e))?;
        }
        for r in 0..self.data.p() {
            self.sample_tau(r, state, rng).map_err(|e| (Step::Tau(r), e))?;
        }
        self.sample_sparsity_probs(state, rng)
            .map_err(|e| (Step::SparsityProbs, e))?;
        self.sample_sigma_tau2(state, rng).map_err(|e| (Step::SigmaTau2, e))?;
        self.sample_precision_matrix(state, rng)
            .map_err(|e| (Step::Precision, e))?;
        state.check_support(&self.data.groups).map_err(|e| (Step::Support, e))?;

        if sweep < self.hyper.n_burnin {
            self.em_segment.push(state.sigma_tau2);
            if (sweep + 1).is_multiple_of(self.hyper.em_interval) {
                state.d = update_d(&self.em_segment, self.hyper.sigma_tau_shape).map_err(|e| (Step::EmUpdate, e))?;
                self.em_segment.clear();
            }
            if (sweep + 1).is_multiple_of(self.hyper.adapt_interval) {
                self.adapt_latent_steps();
            }
        }
        Ok(())
    }
}

fn update_d(segment: &[f64], shape: f64) -> Result<f64> {
    super::hyper::update_d_mcem(segment, shape)
}

/// Runs a chain from the default initial state.
pub fn run_chain(
    data: &MixedResponseDataset,
    hyper: &Hyperparameters,
    fixed: &FixedParameters,
    rng: RngStream,
) -> std::result::Result<PosteriorChain, ChainError> {
    run_chain_from(data, hyper, fixed, ModelState::initial(data, hyper), rng)
}

/// Runs `hyper.n_iter` sweeps from `state`, keeping every sweep after
/// burn-in.
pub fn run_chain_from(
    data: &MixedResponseDataset,
    hyper: &Hyperparameters,
    fixed: &FixedParameters,
    mut state: ModelState,
    mut rng: RngStream,
) -> std::result::Result<PosteriorChain, ChainError> {
    let layout = data.layout();
    let mut chain = PosteriorChain {
        p: data.p(),
        layout,
        group_sizes: data.groups.sizes().to_vec(),
        seed: rng.seed(),
        stream: rng.stream(),
        n_burnin: hyper.n_burnin,
        n_iter: hyper.n_iter,
        draws: Vec::with_capacity(hyper.n_iter.saturating_sub(hyper.n_burnin)),
        truncated_at: None,
        acceptance: vec![None; layout.q()],
    };
    let fail = |chain: PosteriorChain, sweep, step, source| ChainError {
        sweep,
        step,
        source,
        partial: Box::new(PosteriorChain {
            truncated_at: Some(sweep),
            ..chain
        }),
    };
    let mut sampler = match Sampler::new(data, hyper, fixed.clone(), &state) {
        Ok(s) => s,
        Err(e) => return Err(fail(chain, 0, Step::Latent, e)),
    };
    for sweep in 0..hyper.n_iter {
        if let Err((step, e)) = sampler.sweep(&mut state, sweep, &mut rng) {
            return Err(fail(chain, sweep, step, e));
        }
        if sweep >= hyper.n_burnin {
            chain.draws.push(Draw::from_state(sweep as u64, &state));
        }
    }
    chain.acceptance = (0..layout.q())
        .map(|j| {
            if j < layout.l {
                None
            } else {
                sampler.tuner().acceptance_rate(j)
            }
        })
        .collect();
    Ok(chain)
}
