//! Random draws and the few closed-form densities the sampler needs.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Beta, Distribution, Exp1, Gamma, StandardNormal};
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::linalg::SpdMatrix;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Standardized truncation point above which the exponential-proposal tail
/// sampler replaces plain rejection.
const TAIL_SWITCH: f64 = 0.45;

pub fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Matrix of i.i.d. standard normals.
pub fn std_normal_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    // column-major fill order, fixed so streams are reproducible
    let mut m = DMatrix::zeros(rows, cols);
    for v in m.iter_mut() {
        *v = std_normal(rng);
    }
    m
}

/// `mean + L z` with `L` the lower Cholesky factor of `covariance`.
pub fn draw_mvn<R: Rng + ?Sized>(mean: &DVector<f64>, covariance: &SpdMatrix, rng: &mut R) -> Result<DVector<f64>> {
    if mean.len() != covariance.dim() {
        return Err(Error::Dimension(format!(
            "mean has length {} but covariance is {}x{}",
            mean.len(),
            covariance.dim(),
            covariance.dim()
        )));
    }
    let chol = covariance.cholesky()?;
    let z = DVector::from_fn(mean.len(), |_, _| std_normal(rng));
    Ok(mean + chol.l() * z)
}

/// Draw from `N(mu, sigma2)` conditioned on being strictly positive.
pub fn draw_truncnorm_pos<R: Rng + ?Sized>(mu: f64, sigma2: f64, rng: &mut R) -> Result<f64> {
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::Domain(format!(
            "truncated normal variance must be positive and finite, got {sigma2}"
        )));
    }
    if !mu.is_finite() {
        return Err(Error::Domain(format!("truncated normal mean is {mu}")));
    }
    let sigma = sigma2.sqrt();
    let lower = -mu / sigma;
    loop {
        let y = if lower <= TAIL_SWITCH {
            let y = std_normal(rng);
            if y <= lower {
                continue;
            }
            y
        } else {
            robert_tail(lower, rng)
        };
        let x = mu + sigma * y;
        if x > 0.0 {
            return Ok(x);
        }
    }
}

/// Standard normal truncated to `(a, ∞)` for `a > 0`, using the optimal
/// translated-exponential proposal.
fn robert_tail<R: Rng + ?Sized>(a: f64, rng: &mut R) -> f64 {
    let rate = 0.5 * (a + (a * a + 4.0).sqrt());
    loop {
        let e: f64 = rng.sample(Exp1);
        let z = a + e / rate;
        let u: f64 = rng.random();
        if u <= (-0.5 * (z - rate) * (z - rate)).exp() {
            return z;
        }
    }
}

/// Gamma draw in the shape–rate convention (mean `shape / rate`).
pub fn draw_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> Result<f64> {
    if !(shape > 0.0) || !(rate > 0.0) || !shape.is_finite() || !rate.is_finite() {
        return Err(Error::Domain(format!(
            "gamma parameters must be positive, got shape={shape}, rate={rate}"
        )));
    }
    let g = Gamma::new(shape, 1.0 / rate).map_err(|e| Error::Domain(format!("gamma({shape}, {rate}): {e}")))?;
    Ok(g.sample(rng))
}

pub fn draw_beta<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> Result<f64> {
    if !(a > 0.0) || !(b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(Error::Domain(format!(
            "beta parameters must be positive, got a={a}, b={b}"
        )));
    }
    let d = Beta::new(a, b).map_err(|e| Error::Domain(format!("beta({a}, {b}): {e}")))?;
    Ok(d.sample(rng))
}

/// Inverse-gamma draw with density `bᵃ x^{-(a+1)} exp(-b/x) / Γ(a)`, taken as
/// the reciprocal of a `Gamma(shape, rate = scale)` draw.
pub fn draw_invgamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> Result<f64> {
    Ok(1.0 / draw_gamma(shape, scale, rng)?)
}

pub fn invgamma_pdf(x: f64, shape: f64, scale: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    (shape * scale.ln() - (shape + 1.0) * x.ln() - scale / x - ln_gamma(shape)).exp()
}

pub fn normal_logpdf(x: f64, mean: f64, var: f64) -> f64 {
    -LN_SQRT_2PI - 0.5 * var.ln() - 0.5 * (x - mean) * (x - mean) / var
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `log Φ(x)`, accurate far into the lower tail.
pub fn log_normal_cdf(x: f64) -> f64 {
    if x > -30.0 {
        normal_cdf(x).ln()
    } else {
        // Mills-ratio expansion
        let x2 = x * x;
        let series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
        -0.5 * x2 - (-x).ln() - LN_SQRT_2PI + series.ln()
    }
}

/// `log(eᵃ + eᵇ)`
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Probability of the first branch given the two branch log weights.
pub fn first_branch_prob(log_first: f64, log_second: f64) -> f64 {
    if log_second == f64::NEG_INFINITY {
        return 1.0;
    }
    if log_first == f64::NEG_INFINITY {
        return 0.0;
    }
    let p = 1.0 / (1.0 + (log_second - log_first).exp());
    p.clamp(0.0, 1.0)
}

/// Numerically stable `log(1 + eˣ)`.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}
