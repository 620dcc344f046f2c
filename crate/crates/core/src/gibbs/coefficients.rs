//! Group spike-and-slab coefficients and row scales.

use nalgebra::DMatrix;
use rand::Rng;

use super::Sampler;
use crate::dist::{draw_truncnorm_pos, first_branch_prob, log_normal_cdf, std_normal_matrix};
use crate::error::Result;
use crate::linalg::{cholesky, CholeskyFactor};
use crate::model::ModelState;

const VAR_FLOOR: f64 = 1e-12;

/// Conditional quantities of one coefficient group.
#[derive(Clone, Debug)]
pub struct GroupUpdateWorkspace {
    /// Factor of `Ψ⁻¹ = I + V XᵍᵀXᵍ V`.
    pub psi_inv_chol: CholeskyFactor,
    /// Slab mean `M = Ψ V Xᵍᵀ Rᵍ`.
    pub mean: DMatrix<f64>,
    /// Conditional probability that the group is excluded.
    pub exclusion_prob: f64,
}

impl GroupUpdateWorkspace {
    /// `Ψ`, the row covariance of the slab.
    pub fn psi(&self) -> DMatrix<f64> {
        self.psi_inv_chol.inverse()
    }
}

/// Full-conditional log weights of the two branches of one row scale:
/// `(log weight of τ = 0, log weight of τ > 0, slab mean, slab variance)`.
pub(crate) fn tau_branches(pi2: f64, sigma_tau2: f64, lin: f64, prec_lik: f64) -> (f64, f64, f64, f64) {
    let var = (1.0 / (prec_lik + 1.0 / sigma_tau2)).max(VAR_FLOOR);
    let mu = var * lin;
    let log_zero = pi2.ln();
    let log_slab = (1.0 - pi2).ln() + std::f64::consts::LN_2 - 0.5 * sigma_tau2.ln()
        + 0.5 * var.ln()
        + 0.5 * mu * mu / var
        + log_normal_cdf(mu / var.sqrt());
    (log_zero, log_slab, mu, var)
}

impl Sampler<'_> {
    fn group_target(&self, g: usize, state: &ModelState) -> DMatrix<f64> {
        // residual with group g's own contribution added back
        let range = self.data.groups.range(g);
        let mut target = self.resid.clone();
        for r in range {
            let t = state.tau[r];
            if t == 0.0 {
                continue;
            }
            let xc = self.data.x.column(r);
            for j in 0..state.q() {
                let b = t * state.b_tilde[(r, j)];
                if b != 0.0 {
                    target.column_mut(j).axpy(b, &xc, 1.0);
                }
            }
        }
        target
    }

    /// Slab factor, slab mean and exclusion probability of group `g`.
    pub fn group_workspace(&self, g: usize, state: &ModelState) -> Result<GroupUpdateWorkspace> {
        self.group_workspace_inner(g, state).map_err(|e| e.in_group(g))
    }

    fn group_workspace_inner(&self, g: usize, state: &ModelState) -> Result<GroupUpdateWorkspace> {
        let range = self.data.groups.range(g);
        let pg = range.len();
        let q = state.q();
        let v: Vec<f64> = range.clone().map(|r| state.tau[r]).collect();

        let gram = &self.grams[g];
        let a = DMatrix::from_fn(pg, pg, |i, k| {
            v[i] * gram[(i, k)] * v[k] + if i == k { 1.0 } else { 0.0 }
        });
        let a_chol = cholesky(&a)?;

        let target = self.group_target(g, state);
        let xg = self.data.x.columns(range.start, pg);
        let mut c = xg.tr_mul(&target);
        for (i, &vi) in v.iter().enumerate() {
            c.row_mut(i).scale_mut(vi);
        }

        // y = L⁻¹ C, so Mᵀ Ψ⁻¹ M = yᵀ y and M = L⁻ᵀ y
        let mut y = c;
        a_chol.solve_lower_mut(&mut y);
        let yty = y.tr_mul(&y);
        let omega = state.omega.as_matrix();
        let mut quad = 0.0;
        for i in 0..q {
            for k in 0..q {
                quad += omega[(i, k)] * yty[(i, k)];
            }
        }
        let log_det_psi = -a_chol.log_det();
        let pi1 = self.fixed.pi1.unwrap_or(state.pi1);
        let log_excl = pi1.ln();
        let log_incl = (1.0 - pi1).ln() + 0.5 * q as f64 * log_det_psi + 0.5 * quad;
        let exclusion_prob = first_branch_prob(log_excl, log_incl);

        let mut mean = y;
        a_chol.solve_upper_mut(&mut mean);
        Ok(GroupUpdateWorkspace {
            psi_inv_chol: a_chol,
            mean,
            exclusion_prob,
        })
    }

    /// Probability that group `g` is excluded given everything else.
    pub fn compute_group_inclusion_prob(&self, g: usize, state: &ModelState) -> Result<f64> {
        Ok(self.group_workspace(g, state)?.exclusion_prob)
    }

    /// Draws `B̃_g` from its spike-and-slab conditional. On exclusion the rows
    /// become exact zeros.
    pub fn sample_coefficient_group<R: Rng + ?Sized>(
        &mut self,
        g: usize,
        state: &mut ModelState,
        rng: &mut R,
    ) -> Result<()> {
        let ws = self.group_workspace(g, state)?;
        let range = self.data.groups.range(g);
        let q = state.q();
        let u: f64 = rng.random();
        let new = if u < ws.exclusion_prob {
            state.group_included[g] = false;
            DMatrix::zeros(range.len(), q)
        } else {
            state.group_included[g] = true;
            let omega_chol = state.omega.cholesky().map_err(|e| e.in_group(g))?;
            // row covariance Ψ, column covariance Ω⁻¹
            let z = std_normal_matrix(range.len(), q, rng);
            let rows = ws.psi_inv_chol.inv_upper_apply(&z);
            let mut cols = rows.transpose();
            omega_chol.solve_upper_mut(&mut cols);
            ws.mean + cols.transpose()
        };
        for (i, r) in range.enumerate() {
            let t = state.tau[r];
            for j in 0..q {
                let delta = t * (new[(i, j)] - state.b_tilde[(r, j)]);
                if delta != 0.0 {
                    let xc = self.data.x.column(r);
                    self.resid.column_mut(j).axpy(-delta, &xc, 1.0);
                }
                state.b_tilde[(r, j)] = new[(i, j)];
            }
        }
        Ok(())
    }

    /// `(probability τ_r = 0, slab mean, slab variance)` for row `r`.
    pub fn tau_conditional(&self, r: usize, state: &ModelState) -> (f64, f64, f64) {
        let q = state.q();
        let omega = state.omega.as_matrix();
        let bt = state.b_tilde.row(r);
        let ob = omega * bt.transpose();
        let s = (bt * &ob)[(0, 0)];
        let xc = self.data.x.column(r);
        let t = state.tau[r];
        let mut lin = 0.0;
        for j in 0..q {
            // xᵀ (E + τ x b̃ᵀ) Ω b̃
            let xe = xc.dot(&self.resid.column(j)) + t * self.col_sq_norms[r] * bt[j];
            lin += xe * ob[j];
        }
        let pi2 = self.fixed.pi2.unwrap_or(state.pi2);
        let (lz, ls, mu, var) = tau_branches(pi2, state.sigma_tau2, lin, self.col_sq_norms[r] * s);
        (first_branch_prob(lz, ls), mu, var)
    }

    /// Draws `τ_r` from its point-mass / truncated-normal conditional.
    pub fn sample_tau<R: Rng + ?Sized>(&mut self, r: usize, state: &mut ModelState, rng: &mut R) -> Result<()> {
        if self.fixed.tau {
            return Ok(());
        }
        let (p_zero, mu, var) = self.tau_conditional(r, state);
        let u: f64 = rng.random();
        let new = if u < p_zero {
            0.0
        } else {
            draw_truncnorm_pos(mu, var, rng)?
        };
        let delta = new - state.tau[r];
        if delta != 0.0 {
            let xc = self.data.x.column(r);
            for j in 0..state.q() {
                let b = state.b_tilde[(r, j)];
                if b != 0.0 {
                    self.resid.column_mut(j).axpy(-delta * b, &xc, 1.0);
                }
            }
        }
        state.tau[r] = new;
        Ok(())
    }
}
