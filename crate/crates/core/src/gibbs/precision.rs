//! Column-wise block update of the precision matrix under the continuous
//! spike-and-slab graphical prior.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::Sampler;
use crate::dist::{draw_gamma, first_branch_prob, normal_logpdf, std_normal_matrix};
use crate::error::Result;
use crate::linalg::{cholesky, symmetrize, CholeskyFactor, SpdMatrix};
use crate::model::{GroupStructure, ModelState};

/// Prior constants of the precision matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrecisionPrior {
    /// Spike standard deviation of an off-diagonal entry.
    pub sigma0: f64,
    /// Slab standard deviation of an off-diagonal entry.
    pub sigma1: f64,
    /// Exponential rate (times two) on each diagonal entry.
    pub lambda: f64,
}

/// Conditional distribution of column `j` given the rest of Ω.
#[derive(Clone, Debug)]
pub struct OmegaBlockWorkspace {
    pub column: usize,
    pub omega11_inv: DMatrix<f64>,
    /// Mean of the off-diagonal part and the factor of its precision.
    pub mean: DVector<f64>,
    pub precision_chol: Option<CholeskyFactor>,
    /// Gamma shape and rate of the Schur complement.
    pub gamma_shape: f64,
    pub gamma_rate: f64,
}

impl OmegaBlockWorkspace {
    /// Covariance of the off-diagonal part.
    pub fn cov(&self) -> DMatrix<f64> {
        match &self.precision_chol {
            Some(c) => c.inverse(),
            None => DMatrix::zeros(0, 0),
        }
    }
}

fn others(q: usize, j: usize) -> Vec<usize> {
    (0..q).filter(|&i| i != j).collect()
}

/// Builds the conditional of column `j`.
pub fn column_workspace(
    omega: &DMatrix<f64>,
    edges: &DMatrix<u8>,
    theta: &DMatrix<f64>,
    alpha: f64,
    j: usize,
    prior: PrecisionPrior,
) -> Result<OmegaBlockWorkspace> {
    let q = omega.nrows();
    let idx = others(q, j);
    let rate2 = theta[(j, j)] + prior.lambda;
    let gamma_shape = 0.5 * alpha + 1.0;
    let gamma_rate = 0.5 * rate2;
    if q == 1 {
        return Ok(OmegaBlockWorkspace {
            column: j,
            omega11_inv: DMatrix::zeros(0, 0),
            mean: DVector::zeros(0),
            precision_chol: None,
            gamma_shape,
            gamma_rate,
        });
    }
    let o11 = omega.select_rows(&idx).select_columns(&idx);
    let omega11_inv = cholesky(&o11).map_err(|e| e.in_column(j))?.inverse();
    let mut c = omega11_inv.scale(rate2);
    for (a, &i) in idx.iter().enumerate() {
        let sd = if edges[(i, j)] == 1 { prior.sigma1 } else { prior.sigma0 };
        c[(a, a)] += 1.0 / (sd * sd);
    }
    let c_chol = cholesky(&c).map_err(|e| e.in_column(j))?;
    let theta12 = DMatrix::from_fn(q - 1, 1, |a, _| theta[(idx[a], j)]);
    let mean = -c_chol.solve(&theta12);
    Ok(OmegaBlockWorkspace {
        column: j,
        omega11_inv,
        mean: DVector::from_column_slice(mean.as_slice()),
        precision_chol: Some(c_chol),
        gamma_shape,
        gamma_rate,
    })
}

/// Conditional probability that the edge with value `w` is in the slab.
pub fn edge_inclusion_prob(w: f64, pi3: f64, sigma0: f64, sigma1: f64) -> f64 {
    let slab = pi3.ln() + normal_logpdf(w, 0.0, sigma1 * sigma1);
    let spike = (1.0 - pi3).ln() + normal_logpdf(w, 0.0, sigma0 * sigma0);
    first_branch_prob(slab, spike)
}

/// `Θ = EᵀE + B̃ᵀB̃` and `α = n + Σ p_g 1{group g included}`.
pub fn theta_alpha(
    resid: &DMatrix<f64>,
    b_tilde: &DMatrix<f64>,
    included: &[bool],
    groups: &GroupStructure,
) -> (DMatrix<f64>, f64) {
    let mut theta = resid.tr_mul(resid) + b_tilde.tr_mul(b_tilde);
    symmetrize(&mut theta);
    let rows: usize = (0..groups.n_groups())
        .filter(|&g| included[g])
        .map(|g| groups.size(g))
        .sum();
    (theta, (resid.nrows() + rows) as f64)
}

/// One sweep over the columns of Ω followed by a refresh of every edge
/// indicator. `omega` and `edges` are updated in place.
#[allow(clippy::too_many_arguments)]
pub fn sample_precision<R: Rng + ?Sized>(
    omega: &mut DMatrix<f64>,
    edges: &mut DMatrix<u8>,
    theta: &DMatrix<f64>,
    alpha: f64,
    pi3: f64,
    prior: PrecisionPrior,
    rng: &mut R,
) -> Result<()> {
    let q = omega.nrows();
    for j in 0..q {
        let ws = column_workspace(omega, edges, theta, alpha, j, prior)?;
        let idx = others(q, j);
        let eta = match &ws.precision_chol {
            Some(c_chol) => {
                let z = std_normal_matrix(q - 1, 1, rng);
                &ws.mean + DVector::from_column_slice(c_chol.inv_upper_apply(&z).as_slice())
            }
            None => DVector::zeros(0),
        };
        let zeta = draw_gamma(ws.gamma_shape, ws.gamma_rate, rng).map_err(|e| e.in_column(j))?;
        let quad = if q > 1 {
            (eta.transpose() * &ws.omega11_inv * &eta)[(0, 0)]
        } else {
            0.0
        };
        for (a, &i) in idx.iter().enumerate() {
            omega[(i, j)] = eta[a];
            omega[(j, i)] = eta[a];
        }
        omega[(j, j)] = zeta + quad;
    }
    for j in 1..q {
        for i in 0..j {
            let p = edge_inclusion_prob(omega[(i, j)], pi3, prior.sigma0, prior.sigma1);
            let u: f64 = rng.random();
            let e = u8::from(u < p);
            edges[(i, j)] = e;
            edges[(j, i)] = e;
        }
    }
    Ok(())
}

impl Sampler<'_> {
    pub fn prior_for_precision(&self) -> PrecisionPrior {
        PrecisionPrior {
            sigma0: self.hyper.sigma0,
            sigma1: self.hyper.sigma1,
            lambda: self.hyper.lambda,
        }
    }

    /// Current `(Θ, α)`.
    pub fn theta_alpha(&self, state: &ModelState) -> (DMatrix<f64>, f64) {
        theta_alpha(&self.resid, &state.b_tilde, &state.group_included, &self.data.groups)
    }

    pub fn sample_precision_matrix<R: Rng + ?Sized>(&mut self, state: &mut ModelState, rng: &mut R) -> Result<()> {
        if self.fixed.omega {
            return Ok(());
        }
        let (theta, alpha) = self.theta_alpha(state);
        let mut omega = state.omega.as_matrix().clone();
        let mut edges = state.edge_ind.clone();
        let pi3 = self.fixed.pi3.unwrap_or(state.pi3);
        sample_precision(
            &mut omega,
            &mut edges,
            &theta,
            alpha,
            pi3,
            self.prior_for_precision(),
            rng,
        )?;
        symmetrize(&mut omega);
        state.omega = SpdMatrix::new(omega)?;
        state.edge_ind = edges;
        Ok(())
    }
}
