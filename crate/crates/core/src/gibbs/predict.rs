//! Posterior predictive summaries at a new design point.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::PosteriorChain;
use crate::diagnostics::quantile;
use crate::dist::{std_normal, std_normal_matrix};
use crate::error::{Error, Result};
use crate::linalg::cholesky;
use crate::model::{linear_predictor, response_links, ResponseKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PredictionMode {
    /// `b₀ + Bᵀx` per draw.
    MeanPath,
    /// Adds latent noise `N(0, Ω⁻¹)`, and observation noise on continuous
    /// slots.
    Predictive,
}

/// Percentile summary of one response on its natural scale (mean for
/// continuous, rate for counts, probability for binaries).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResponseSummary {
    pub kind: ResponseKind,
    pub lower: f64,
    pub median: f64,
    pub upper: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub responses: Vec<ResponseSummary>,
    /// `1{median γ > 0.5}` for each binary response.
    pub binary_class: Vec<u8>,
}

pub fn posterior_predict<R: Rng + ?Sized>(
    chain: &PosteriorChain,
    x_new: &DVector<f64>,
    mode: PredictionMode,
    rng: &mut R,
) -> Result<Prediction> {
    if chain.is_empty() {
        return Err(Error::Dimension("cannot predict from an empty chain".into()));
    }
    if x_new.len() != chain.p {
        return Err(Error::Dimension(format!(
            "x has length {} but the chain has {} predictors",
            x_new.len(),
            chain.p
        )));
    }
    let lay = chain.layout;
    let q = lay.q();
    let mut values = vec![Vec::with_capacity(chain.len()); q];
    for d in &chain.draws {
        let mut xi = linear_predictor(&d.b, x_new)? + &d.intercept;
        if mode == PredictionMode::Predictive {
            let chol = cholesky(&d.omega)?;
            let eps = chol.inv_upper_apply(&std_normal_matrix(q, 1, rng));
            xi += DVector::from_column_slice(eps.as_slice());
            for j in 0..lay.l {
                xi[j] += d.sigma2_gauss[j].sqrt() * std_normal(rng);
            }
        }
        let links = response_links(&xi, lay)?;
        let natural = links.mu.iter().chain(links.lambda.iter()).chain(links.gamma.iter());
        for (j, v) in natural.enumerate() {
            values[j].push(*v);
        }
    }
    let mut responses = Vec::with_capacity(q);
    let mut binary_class = Vec::with_capacity(lay.k);
    for (j, v) in values.iter_mut().enumerate() {
        let s = ResponseSummary {
            kind: lay.kind(j),
            lower: quantile(v, 0.025),
            median: quantile(v, 0.5),
            upper: quantile(v, 0.975),
        };
        if s.kind == ResponseKind::Binary {
            binary_class.push(u8::from(s.median > 0.5));
        }
        responses.push(s);
    }
    Ok(Prediction {
        responses,
        binary_class,
    })
}

/// Mean-path point predictions for every row of `x`, as an n×q matrix of
/// posterior medians on the natural scale.
pub fn predict_rows(chain: &PosteriorChain, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let q = chain.q();
    let mut out = DMatrix::zeros(x.nrows(), q);
    // mean-path mode draws nothing from the stream
    let mut unused = crate::rng::RngStream::new(0, 0);
    for i in 0..x.nrows() {
        let xr = x.row(i).transpose();
        let pred = posterior_predict(chain, &xr, PredictionMode::MeanPath, &mut unused)?;
        for (j, s) in pred.responses.iter().enumerate() {
            out[(i, j)] = s.median;
        }
    }
    Ok(out)
}
