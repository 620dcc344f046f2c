#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::Rng;

use bsmrmr::dist::std_normal;
use bsmrmr::{GroupStructure, MixedResponseDataset, ModelState, RngStream};

/// Random predictors with noise responses of the requested block sizes.
pub fn dataset(n: usize, groups: &[usize], (l, m, k): (usize, usize, usize), seed: u64) -> MixedResponseDataset {
    let mut rng = RngStream::new(seed, 1000);
    let p: usize = groups.iter().sum();
    let x = DMatrix::from_fn(n, p, |_, _| std_normal(&mut rng));
    let u = DMatrix::from_fn(n, l, |_, _| std_normal(&mut rng));
    let z = DMatrix::from_fn(n, m, |_, _| rng.random_range(0..5u64));
    let w = DMatrix::from_fn(n, k, |_, _| rng.random_range(0..2u8));
    MixedResponseDataset::new(x, u, z, w, GroupStructure::new(groups.to_vec()).unwrap()).unwrap()
}

/// `Ξ − 1b₀ᵀ − X diag(τ) B̃`, computed entry by entry.
pub fn residual(data: &MixedResponseDataset, s: &ModelState) -> DMatrix<f64> {
    let (n, p, q) = (data.n(), data.p(), data.q());
    DMatrix::from_fn(n, q, |i, j| {
        let mut v = s.xi[(i, j)] - s.intercept[j];
        for r in 0..p {
            v -= data.x[(i, r)] * s.tau[r] * s.b_tilde[(r, j)];
        }
        v
    })
}

/// `−½ Σᵢ eᵢᵀ Ω eᵢ`
pub fn gaussian_loglik(e: &DMatrix<f64>, omega: &DMatrix<f64>) -> f64 {
    let mut total = 0.0;
    for row in e.row_iter() {
        total += (row * omega * row.transpose())[(0, 0)];
    }
    -0.5 * total
}

pub fn normal_logpdf(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * ((2.0 * std::f64::consts::PI * var).ln() + (x - mean).powi(2) / var)
}
