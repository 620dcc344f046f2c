//! Bayesian sparse multivariate regression for mixed continuous, count and
//! binary responses.
//!
//! The responses share a Gaussian latent layer `ξᵢ ~ N(b₀ + Bᵀxᵢ, Ω⁻¹)`
//! mapped through identity, log and logit links. Coefficients carry a
//! two-level spike-and-slab prior (whole predictor groups and single rows),
//! and the latent precision `Ω` a continuous spike-and-slab graphical prior.
//! [`gibbs`] holds the sampler; [`synth`], [`eval`] and [`diagnostics`] cover
//! the simulation study around it.

// NaN-rejecting checks are written as negated comparisons
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod dist;
pub mod error;
pub mod eval;
pub mod gibbs;
pub mod io;
pub mod linalg;
pub mod model;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
pub use gibbs::{run_chain, FixedParameters, PosteriorChain, Sampler};
pub use linalg::SpdMatrix;
pub use model::{GroupStructure, Hyperparameters, MixedResponseDataset, ModelState, ResponseLayout};
pub use rng::{Purpose, RngStream};
