//! Sparsity probabilities, the row-scale variance and its EM-tuned scale.

use rand::Rng;

use super::Sampler;
use crate::dist::{draw_beta, draw_invgamma};
use crate::error::{Error, Result};
use crate::model::{Hyperparameters, ModelState};

const VAR_FLOOR: f64 = 1e-12;

/// Zero / non-zero tallies feeding the three beta conditionals.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SparsityCounts {
    pub groups_excluded: usize,
    pub groups_included: usize,
    pub tau_zero: usize,
    pub tau_nonzero: usize,
    pub edges_on: usize,
    pub edges_off: usize,
}

impl SparsityCounts {
    pub fn of(state: &ModelState) -> Self {
        let groups_excluded = state.group_included.iter().filter(|&&b| !b).count();
        let tau_zero = state.tau.iter().filter(|&&t| t == 0.0).count();
        let q = state.q();
        let mut edges_on = 0;
        for j in 1..q {
            for i in 0..j {
                edges_on += usize::from(state.edge_ind[(i, j)] == 1);
            }
        }
        SparsityCounts {
            groups_excluded,
            groups_included: state.group_included.len() - groups_excluded,
            tau_zero,
            tau_nonzero: state.tau.len() - tau_zero,
            edges_on,
            edges_off: q * (q.saturating_sub(1)) / 2 - edges_on,
        }
    }
}

/// Beta parameters of the π₁, π₂ and π₃ conditionals.
pub fn beta_parameters(state: &ModelState, hyper: &Hyperparameters) -> [(f64, f64); 3] {
    let c = SparsityCounts::of(state);
    [
        (hyper.a1 + c.groups_excluded as f64, hyper.a2 + c.groups_included as f64),
        (hyper.a3 + c.tau_zero as f64, hyper.a4 + c.tau_nonzero as f64),
        (hyper.a5 + c.edges_on as f64, hyper.a6 + c.edges_off as f64),
    ]
}

/// Monte Carlo EM update of the σ_τ² prior scale: the value maximizing the
/// averaged inverse-gamma log prior over the recent σ_τ² draws.
pub fn update_d_mcem(segment: &[f64], shape: f64) -> Result<f64> {
    if segment.is_empty() {
        return Err(Error::Domain("EM update needs at least one sigma_tau2 draw".into()));
    }
    let mean_inv = segment.iter().map(|v| 1.0 / v).sum::<f64>() / segment.len() as f64;
    let d = shape / mean_inv;
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::Domain(format!("EM update produced d = {d}")));
    }
    Ok(d)
}

impl Sampler<'_> {
    pub fn sample_sparsity_probs<R: Rng + ?Sized>(&mut self, state: &mut ModelState, rng: &mut R) -> Result<()> {
        let [b1, b2, b3] = beta_parameters(state, self.hyper);
        // always consume three draws so pins do not shift the stream
        let d1 = draw_beta(b1.0, b1.1, rng)?;
        let d2 = draw_beta(b2.0, b2.1, rng)?;
        let d3 = draw_beta(b3.0, b3.1, rng)?;
        state.pi1 = self.fixed.pi1.unwrap_or(d1);
        state.pi2 = self.fixed.pi2.unwrap_or(d2);
        state.pi3 = self.fixed.pi3.unwrap_or(d3);
        Ok(())
    }

    pub fn sample_sigma_tau2<R: Rng + ?Sized>(&mut self, state: &mut ModelState, rng: &mut R) -> Result<()> {
        if self.fixed.sigma_tau2 {
            return Ok(());
        }
        let nonzero = state.tau.iter().filter(|&&t| t != 0.0).count();
        let ss: f64 = state.tau.iter().map(|t| t * t).sum();
        let shape = self.hyper.sigma_tau_shape + 0.5 * nonzero as f64;
        let scale = state.d + 0.5 * ss;
        state.sigma_tau2 = draw_invgamma(shape, scale, rng)?.max(VAR_FLOOR);
        Ok(())
    }
}
