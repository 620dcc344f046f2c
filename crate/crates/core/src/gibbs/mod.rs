//! The Gibbs kernel.
//!
//! One sweep updates, in order: the latent predictors Ξ and the Gaussian
//! response variances, the intercept, every coefficient group B̃_g, every row
//! scale τ, the sparsity probabilities π₁, π₂, π₃ and σ_τ², and finally the
//! precision matrix Ω together with its edge indicators.
//!
//! [`Sampler`] carries the per-dataset caches (group Gram matrices, column
//! norms) and the running residual `E = Ξ − 1b₀ᵀ − XB`. Every update method
//! assumes `E` matches the state it is handed and leaves it matching the
//! state it returns; call [`Sampler::refresh`] after editing a state by hand.

mod chain;
mod coefficients;
mod hyper;
mod latent;
mod precision;
mod predict;

pub use chain::{record_len, run_chain, run_chain_from, ChainError, Draw, PosteriorChain, Step};
pub use coefficients::GroupUpdateWorkspace;
pub use hyper::{beta_parameters, update_d_mcem, SparsityCounts};
pub use latent::{gaussian_variance_params, LatentTuner};
pub use precision::{
    column_workspace, edge_inclusion_prob, sample_precision, theta_alpha, OmegaBlockWorkspace, PrecisionPrior,
};
pub use predict::{posterior_predict, predict_rows, Prediction, PredictionMode, ResponseSummary};

use nalgebra::DMatrix;

use crate::error::Result;
use crate::model::{effective_coefficients, Hyperparameters, MixedResponseDataset, ModelState};

/// Parameters held at their current value instead of being resampled. Used
/// by oracle checks that need a conjugate sub-model.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FixedParameters {
    pub omega: bool,
    pub tau: bool,
    pub sigma_tau2: bool,
    pub sigma2_gauss: bool,
    pub pi1: Option<f64>,
    pub pi2: Option<f64>,
    pub pi3: Option<f64>,
}

pub struct Sampler<'a> {
    data: &'a MixedResponseDataset,
    hyper: &'a Hyperparameters,
    fixed: FixedParameters,
    grams: Vec<DMatrix<f64>>,
    col_sq_norms: Vec<f64>,
    resid: DMatrix<f64>,
    tuner: LatentTuner,
    em_segment: Vec<f64>,
}

impl<'a> Sampler<'a> {
    pub fn new(
        data: &'a MixedResponseDataset,
        hyper: &'a Hyperparameters,
        fixed: FixedParameters,
        state: &ModelState,
    ) -> Result<Self> {
        hyper.validate()?;
        let groups = &data.groups;
        let grams = (0..groups.n_groups())
            .map(|g| {
                let xg = data.x.columns(groups.offset(g), groups.size(g));
                xg.tr_mul(&xg)
            })
            .collect();
        let col_sq_norms = data.x.column_iter().map(|c| c.norm_squared()).collect();
        let mut s = Sampler {
            data,
            hyper,
            fixed,
            grams,
            col_sq_norms,
            resid: DMatrix::zeros(data.n(), data.q()),
            tuner: LatentTuner::new(data.layout(), hyper.mh_step),
            em_segment: Vec::new(),
        };
        s.refresh(state);
        Ok(s)
    }

    pub fn data(&self) -> &MixedResponseDataset {
        self.data
    }

    pub fn hyper(&self) -> &Hyperparameters {
        self.hyper
    }

    pub fn fixed(&self) -> &FixedParameters {
        &self.fixed
    }

    pub fn tuner(&self) -> &LatentTuner {
        &self.tuner
    }

    /// Current residual `Ξ − 1b₀ᵀ − XB`.
    pub fn residual(&self) -> &DMatrix<f64> {
        &self.resid
    }

    /// Recomputes the residual from scratch.
    pub fn refresh(&mut self, state: &ModelState) {
        let b = effective_coefficients(state);
        let mut e = &state.xi - &self.data.x * b;
        for mut row in e.row_iter_mut() {
            row -= state.intercept.transpose();
        }
        self.resid = e;
    }
}
