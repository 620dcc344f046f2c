//! Latent predictor, Gaussian variance and intercept updates.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::Sampler;
use crate::dist::{draw_invgamma, softplus, std_normal, std_normal_matrix};
use crate::error::{Error, Result};
use crate::linalg::cholesky;
use crate::model::{effective_coefficients, ModelState, ResponseKind, ResponseLayout};

const VAR_FLOOR: f64 = 1e-12;
const ACCEPT_LOW: f64 = 0.30;
const ACCEPT_HIGH: f64 = 0.45;

/// Per-slot random-walk scales for the count and binary latent slots,
/// adapted toward a 30–45% acceptance band during burn-in.
#[derive(Clone, Debug)]
pub struct LatentTuner {
    layout: ResponseLayout,
    steps: Vec<f64>,
    accepted: Vec<u64>,
    proposed: Vec<u64>,
    total_accepted: Vec<u64>,
    total_proposed: Vec<u64>,
}

impl LatentTuner {
    pub fn new(layout: ResponseLayout, initial_step: f64) -> Self {
        let q = layout.q();
        LatentTuner {
            layout,
            steps: vec![initial_step; q],
            accepted: vec![0; q],
            proposed: vec![0; q],
            total_accepted: vec![0; q],
            total_proposed: vec![0; q],
        }
    }

    pub fn step(&self, j: usize) -> f64 {
        self.steps[j]
    }

    /// Overall acceptance rate of slot `j` since the start of the chain.
    pub fn acceptance_rate(&self, j: usize) -> Option<f64> {
        (self.total_proposed[j] > 0).then(|| self.total_accepted[j] as f64 / self.total_proposed[j] as f64)
    }

    fn record(&mut self, j: usize, accepted: bool) {
        self.proposed[j] += 1;
        self.total_proposed[j] += 1;
        if accepted {
            self.accepted[j] += 1;
            self.total_accepted[j] += 1;
        }
    }

    /// Rescales every slot whose windowed acceptance left the target band and
    /// clears the window.
    pub fn adapt(&mut self) {
        for j in self.layout.l..self.layout.q() {
            if self.proposed[j] == 0 {
                continue;
            }
            let rate = self.accepted[j] as f64 / self.proposed[j] as f64;
            if rate < ACCEPT_LOW {
                self.steps[j] *= 0.75;
            } else if rate > ACCEPT_HIGH {
                self.steps[j] *= 1.3;
            }
            self.steps[j] = self.steps[j].clamp(1e-4, 1e2);
            self.accepted[j] = 0;
            self.proposed[j] = 0;
        }
    }
}

/// Log likelihood of one non-Gaussian slot, up to a constant.
fn slot_loglik(kind: ResponseKind, y: f64, xi: f64) -> f64 {
    match kind {
        ResponseKind::Count => y * xi - xi.exp(),
        ResponseKind::Binary => y * xi - softplus(xi),
        ResponseKind::Continuous => unreachable!("continuous slots are updated jointly"),
    }
}

impl Sampler<'_> {
    /// Draws every ξᵢ from its full conditional. Continuous slots are drawn
    /// jointly from their exact Gaussian conditional given the other slots;
    /// count and binary slots get one random-walk Metropolis step each.
    pub fn sample_latent_xi<R: Rng + ?Sized>(&mut self, state: &mut ModelState, rng: &mut R) -> Result<()> {
        let data = self.data;
        let lay = data.layout();
        let (l, q) = (lay.l, lay.q());
        let omega = state.omega.as_matrix().clone();
        let b = effective_coefficients(state);

        // joint conditional precision of the continuous block
        let cont_chol = if l > 0 {
            let mut prec = omega.view((0, 0), (l, l)).into_owned();
            for j in 0..l {
                prec[(j, j)] += 1.0 / state.sigma2_gauss[j].max(VAR_FLOOR);
            }
            Some(cholesky(&prec)?)
        } else {
            None
        };

        let mut x_row = vec![0.0; data.p()];
        for i in 0..data.n() {
            for (r, v) in x_row.iter_mut().enumerate() {
                *v = data.x[(i, r)];
            }
            let mean = state.latent_mean(&b, &x_row);
            let mut xi: DVector<f64> = state.xi.row(i).transpose();

            if let Some(chol) = &cont_chol {
                let mut rhs = DMatrix::zeros(l, 1);
                for a in 0..l {
                    let mut s = 0.0;
                    for c in 0..l {
                        s += omega[(a, c)] * mean[c];
                    }
                    for o in l..q {
                        s -= omega[(a, o)] * (xi[o] - mean[o]);
                    }
                    s += data.u[(i, a)] / state.sigma2_gauss[a].max(VAR_FLOOR);
                    rhs[(a, 0)] = s;
                }
                let cond_mean = chol.solve(&rhs);
                let noise = chol.inv_upper_apply(&std_normal_matrix(l, 1, rng));
                for a in 0..l {
                    xi[a] = cond_mean[(a, 0)] + noise[(a, 0)];
                }
            }

            for j in l..q {
                let kind = lay.kind(j);
                let y = data.response(i, j);
                let prec = omega[(j, j)];
                let mut shift = 0.0;
                for c in 0..q {
                    if c != j {
                        shift += omega[(j, c)] * (xi[c] - mean[c]);
                    }
                }
                let centre = mean[j] - shift / prec;
                let log_target = |v: f64| -0.5 * prec * (v - centre) * (v - centre) + slot_loglik(kind, y, v);

                let current = log_target(xi[j]);
                if !current.is_finite() {
                    return Err(Error::NonFiniteDensity { obs: i, component: j });
                }
                let proposal = xi[j] + self.tuner.step(j) * std_normal(rng);
                let proposed = log_target(proposal);
                if proposed.is_nan() {
                    return Err(Error::NonFiniteDensity { obs: i, component: j });
                }
                let log_u: f64 = rng.random::<f64>().ln();
                let accept = log_u < proposed - current;
                if accept {
                    xi[j] = proposal;
                }
                self.tuner.record(j, accept);
            }

            state.xi.set_row(i, &xi.transpose());
        }
        self.refresh(state);
        Ok(())
    }

    pub(crate) fn adapt_latent_steps(&mut self) {
        self.tuner.adapt();
    }

    /// Draws each Gaussian response variance from its inverse-gamma
    /// conditional.
    pub fn sample_gaussian_variances<R: Rng + ?Sized>(&mut self, state: &mut ModelState, rng: &mut R) -> Result<()> {
        let data = self.data;
        let l = data.layout().l;
        if l == 0 || self.fixed.sigma2_gauss {
            return Ok(());
        }
        for j in 0..l {
            let (shape, scale) = gaussian_variance_params(
                data.u.column(j).as_slice(),
                state.xi.column(j).as_slice(),
                self.hyper.gauss_var_shape,
                self.hyper.gauss_var_scale,
                self.hyper.paper_literal_sigma_update,
            )?;
            state.sigma2_gauss[j] = draw_invgamma(shape, scale, rng)?.max(VAR_FLOOR);
        }
        Ok(())
    }

    /// Draws the intercept from `N(mean residual, Ω⁻¹ / n)` under a flat prior.
    pub fn sample_intercept<R: Rng + ?Sized>(&mut self, state: &mut ModelState, rng: &mut R) -> Result<()> {
        let n = self.data.n();
        let q = state.q();
        let chol = state.omega.cholesky()?;
        let mut centre = DVector::zeros(q);
        for j in 0..q {
            centre[j] = self.resid.column(j).sum() / n as f64 + state.intercept[j];
        }
        let noise = chol.inv_upper_apply(&std_normal_matrix(q, 1, rng)) / (n as f64).sqrt();
        let new = centre + DVector::from_column_slice(noise.as_slice());
        let delta = &new - &state.intercept;
        for mut row in self.resid.row_iter_mut() {
            row -= delta.transpose();
        }
        state.intercept = new;
        Ok(())
    }
}

/// Inverse-gamma `(shape, scale)` of one Gaussian variance conditional.
///
/// The conjugate form is `IG(a + n/2, b + ½ Σ (u − ξ)²)`. The literal form
/// `IG(a + n, b + ½ Σ (u − ξ))` can produce a non-positive scale, which is
/// floored.
pub fn gaussian_variance_params(
    u: &[f64],
    xi: &[f64],
    prior_shape: f64,
    prior_scale: f64,
    literal: bool,
) -> Result<(f64, f64)> {
    let n = u.len();
    if n == 0 {
        return Err(Error::Domain(
            "Gaussian variance update needs at least one observation".into(),
        ));
    }
    if literal {
        let s: f64 = u.iter().zip(xi).map(|(a, b)| a - b).sum();
        Ok((prior_shape + n as f64, (prior_scale + 0.5 * s).max(VAR_FLOOR)))
    } else {
        let ss: f64 = u.iter().zip(xi).map(|(a, b)| (a - b) * (a - b)).sum();
        Ok((prior_shape + 0.5 * n as f64, prior_scale + 0.5 * ss))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gibbs::test_support::mixed_dataset;
    use crate::gibbs::FixedParameters;
    use crate::model::Hyperparameters;
    use crate::rng::RngStream;

    #[test]
    fn variance_params_zero_residual() {
        let u = vec![1.0; 10];
        let (a, b) = gaussian_variance_params(&u, &u, 0.5, 0.5, false).unwrap();
        assert_eq!((a, b), (5.5, 0.5));
        let (a, b) = gaussian_variance_params(&u, &u, 0.5, 0.5, true).unwrap();
        assert_eq!((a, b), (10.5, 0.5));
    }

    #[test]
    fn variance_params_reject_empty() {
        assert!(gaussian_variance_params(&[], &[], 0.5, 0.5, false).is_err());
    }

    #[test]
    fn literal_scale_is_floored() {
        let u = vec![0.0; 4];
        let xi = vec![3.0; 4];
        let (_, b) = gaussian_variance_params(&u, &xi, 0.5, 0.5, true).unwrap();
        assert_eq!(b, VAR_FLOOR);
    }

    #[test]
    fn variance_draws_are_reproducible() {
        let data = mixed_dataset(30, 1);
        let hyper = Hyperparameters::defaults_for(3);
        let run = || {
            let mut state = ModelState::initial(&data, &hyper);
            let mut s = Sampler::new(&data, &hyper, FixedParameters::default(), &state).unwrap();
            let mut rng = RngStream::new(42, 0);
            let mut out = vec![];
            for _ in 0..5 {
                s.sample_gaussian_variances(&mut state, &mut rng).unwrap();
                out.push(state.sigma2_gauss[0].to_bits());
            }
            out
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn latent_update_keeps_residual_in_sync() {
        let data = mixed_dataset(25, 2);
        let hyper = Hyperparameters::defaults_for(3);
        let mut state = ModelState::initial(&data, &hyper);
        state.b_tilde[(0, 1)] = 0.4;
        state.intercept[2] = -0.3;
        let mut s = Sampler::new(&data, &hyper, FixedParameters::default(), &state).unwrap();
        let mut rng = RngStream::new(3, 0);
        s.sample_latent_xi(&mut state, &mut rng).unwrap();
        s.sample_intercept(&mut state, &mut rng).unwrap();
        let after = s.residual().clone();
        s.refresh(&state);
        assert!((after - s.residual()).amax() < 1e-12);
    }

    #[test]
    fn non_finite_current_latent_is_reported() {
        let data = mixed_dataset(5, 3);
        let hyper = Hyperparameters::defaults_for(3);
        let mut state = ModelState::initial(&data, &hyper);
        state.xi[(2, 1)] = f64::INFINITY;
        let mut s = Sampler::new(&data, &hyper, FixedParameters::default(), &state).unwrap();
        let mut rng = RngStream::new(3, 0);
        match s.sample_latent_xi(&mut state, &mut rng) {
            Err(Error::NonFiniteDensity { obs, component }) => {
                assert_eq!((obs, component), (2, 1));
            }
            other => panic!("expected a density error, got {other:?}"),
        }
    }
}
