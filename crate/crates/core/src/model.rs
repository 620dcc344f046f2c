//! Datasets, group structure, hyperparameters and the Gibbs state.
//!
//! Responses are always ordered as (continuous, count, binary) blocks, so
//! latent slot `j` is continuous for `j < l`, a count for `l <= j < l + m`
//! and binary otherwise.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SpdMatrix;

/// Largest latent value a count slot may take before `exp` is considered an
/// overflow.
pub const MAX_COUNT_LATENT: f64 = 700.0;

/// Clamp applied to logistic arguments when evaluating probabilities.
pub const LOGIT_CLAMP: f64 = 35.0;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct GroupStructure {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
}

impl GroupStructure {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::Schema("at least one predictor group is required".into()));
        }
        if let Some(g) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::Schema(format!("group {} has size zero", g + 1)));
        }
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut acc = 0;
        for &s in &sizes {
            offsets.push(acc);
            acc += s;
        }
        Ok(GroupStructure { sizes, offsets })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn n_groups(&self) -> usize {
        self.sizes.len()
    }

    pub fn size(&self, g: usize) -> usize {
        self.sizes[g]
    }

    pub fn offset(&self, g: usize) -> usize {
        self.offsets[g]
    }

    pub fn range(&self, g: usize) -> Range<usize> {
        self.offsets[g]..self.offsets[g] + self.sizes[g]
    }

    /// Total number of predictors.
    pub fn p(&self) -> usize {
        self.sizes.iter().sum()
    }

    pub fn group_of(&self, row: usize) -> Option<usize> {
        (0..self.sizes.len()).find(|&g| self.range(g).contains(&row))
    }
}

impl TryFrom<Vec<usize>> for GroupStructure {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        GroupStructure::new(v)
    }
}

impl From<GroupStructure> for Vec<usize> {
    fn from(g: GroupStructure) -> Self {
        g.sizes
    }
}

/// Kind of a latent slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResponseKind {
    Continuous,
    Count,
    Binary,
}

/// Block sizes of the response vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseLayout {
    pub l: usize,
    pub m: usize,
    pub k: usize,
}

impl ResponseLayout {
    pub fn q(&self) -> usize {
        self.l + self.m + self.k
    }

    pub fn kind(&self, j: usize) -> ResponseKind {
        if j < self.l {
            ResponseKind::Continuous
        } else if j < self.l + self.m {
            ResponseKind::Count
        } else {
            ResponseKind::Binary
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixedResponseDataset {
    pub x: DMatrix<f64>,
    pub u: DMatrix<f64>,
    pub z: DMatrix<u64>,
    pub w: DMatrix<u8>,
    pub groups: GroupStructure,
}

impl MixedResponseDataset {
    pub fn new(
        x: DMatrix<f64>,
        u: DMatrix<f64>,
        z: DMatrix<u64>,
        w: DMatrix<u8>,
        groups: GroupStructure,
    ) -> Result<Self> {
        let n = x.nrows();
        if n == 0 {
            return Err(Error::Dataset("dataset has no rows".into()));
        }
        for (name, rows) in [("U", u.nrows()), ("Z", z.nrows()), ("W", w.nrows())] {
            if rows != n {
                return Err(Error::Dataset(format!("{name} has {rows} rows but X has {n}")));
            }
        }
        if u.ncols() + z.ncols() + w.ncols() == 0 {
            return Err(Error::Dataset("at least one response column is required".into()));
        }
        if groups.p() != x.ncols() {
            return Err(Error::Schema(format!(
                "group sizes sum to {} but X has {} columns",
                groups.p(),
                x.ncols()
            )));
        }
        for ((r, c), v) in x.iter().enumerate().map(|(i, v)| ((i % n, i / n), v)) {
            if !v.is_finite() {
                return Err(Error::Cell {
                    row: r,
                    col: c,
                    msg: format!("predictor value {v}"),
                });
            }
        }
        for ((r, c), v) in u.iter().enumerate().map(|(i, v)| ((i % n, i / n), v)) {
            if !v.is_finite() {
                return Err(Error::Cell {
                    row: r,
                    col: x.ncols() + c,
                    msg: format!("continuous response {v}"),
                });
            }
        }
        for ((r, c), v) in w.iter().enumerate().map(|(i, v)| ((i % n, i / n), v)) {
            if *v > 1 {
                return Err(Error::Cell {
                    row: r,
                    col: x.ncols() + u.ncols() + z.ncols() + c,
                    msg: format!("binary response {v}"),
                });
            }
        }
        Ok(MixedResponseDataset { x, u, z, w, groups })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn layout(&self) -> ResponseLayout {
        ResponseLayout {
            l: self.u.ncols(),
            m: self.z.ncols(),
            k: self.w.ncols(),
        }
    }

    pub fn q(&self) -> usize {
        self.layout().q()
    }

    /// Observed value of latent slot `j` for row `i`, as a float.
    pub fn response(&self, i: usize, j: usize) -> f64 {
        let lay = self.layout();
        match lay.kind(j) {
            ResponseKind::Continuous => self.u[(i, j)],
            ResponseKind::Count => self.z[(i, j - lay.l)] as f64,
            ResponseKind::Binary => self.w[(i, j - lay.l - lay.m)] as f64,
        }
    }

    /// Subset of rows, keeping the group structure.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        MixedResponseDataset::new(
            self.x.select_rows(rows),
            self.u.select_rows(rows),
            self.z.select_rows(rows),
            self.w.select_rows(rows),
            self.groups.clone(),
        )
    }
}

/// Prior constants and chain settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    /// Beta prior on the group exclusion probability π₁.
    pub a1: f64,
    pub a2: f64,
    /// Beta prior on the row exclusion probability π₂.
    pub a3: f64,
    pub a4: f64,
    /// Beta prior on the edge probability π₃.
    pub a5: f64,
    pub a6: f64,
    /// Spike and slab standard deviations for off-diagonal precision entries.
    pub sigma0: f64,
    pub sigma1: f64,
    /// Exponential rate parameter on the precision diagonal (density `e(ω; λ/2)`).
    pub lambda: f64,
    /// Inverse-gamma scale of the σ_τ² prior; adapted by Monte Carlo EM.
    pub d: f64,
    /// Inverse-gamma shape of the σ_τ² prior.
    pub sigma_tau_shape: f64,
    /// Inverse-gamma prior on the Gaussian response variances.
    pub gauss_var_shape: f64,
    pub gauss_var_scale: f64,
    pub n_iter: usize,
    pub n_burnin: usize,
    /// Initial random-walk scale for count and binary latent slots.
    pub mh_step: f64,
    /// Sweeps between Monte Carlo EM updates of `d` (burn-in only).
    pub em_interval: usize,
    /// Sweeps between proposal-scale adaptations (burn-in only).
    pub adapt_interval: usize,
    /// Use the printed, non-conjugate form of the Gaussian variance update.
    pub paper_literal_sigma_update: bool,
}

impl Hyperparameters {
    /// Defaults used throughout the simulation study, for `q` responses.
    pub fn defaults_for(q: usize) -> Self {
        let qf = q as f64;
        Hyperparameters {
            a1: 20.0,
            a2: 40.0,
            a3: 20.0,
            a4: 40.0,
            a5: qf.max(1.0),
            a6: (qf * (qf - 1.0) / 2.0).max(1.0),
            sigma0: 0.1,
            sigma1: 3.0,
            lambda: qf.max(1.0),
            d: 1.0,
            sigma_tau_shape: 1.0,
            gauss_var_shape: 0.5,
            gauss_var_scale: 0.5,
            n_iter: 10_000,
            n_burnin: 2_000,
            mh_step: 1.0,
            em_interval: 100,
            adapt_interval: 50,
            paper_literal_sigma_update: false,
        }
    }

    pub fn n_retained(&self) -> usize {
        self.n_iter - self.n_burnin
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("a1", self.a1),
            ("a2", self.a2),
            ("a3", self.a3),
            ("a4", self.a4),
            ("a5", self.a5),
            ("a6", self.a6),
            ("sigma0", self.sigma0),
            ("sigma1", self.sigma1),
            ("lambda", self.lambda),
            ("d", self.d),
            ("sigma_tau_shape", self.sigma_tau_shape),
            ("gauss_var_shape", self.gauss_var_shape),
            ("gauss_var_scale", self.gauss_var_scale),
            ("mh_step", self.mh_step),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Domain(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(self.sigma0 < self.sigma1) {
            return Err(Error::Domain(format!(
                "sigma0 ({}) must be smaller than sigma1 ({})",
                self.sigma0, self.sigma1
            )));
        }
        if self.n_iter == 0 || self.n_burnin >= self.n_iter {
            return Err(Error::Domain(format!(
                "need 0 <= n_burnin < n_iter, got n_burnin={}, n_iter={}",
                self.n_burnin, self.n_iter
            )));
        }
        if self.em_interval == 0 || self.adapt_interval == 0 {
            return Err(Error::Domain("em_interval and adapt_interval must be positive".into()));
        }
        Ok(())
    }
}

/// One full Gibbs state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    /// n×q latent linear predictors.
    pub xi: DMatrix<f64>,
    /// Unpenalized intercept, one entry per response.
    pub intercept: DVector<f64>,
    /// p×q raw coefficients; rows of excluded groups are exactly zero.
    pub b_tilde: DMatrix<f64>,
    /// Row scales; zero removes the predictor.
    pub tau: DVector<f64>,
    pub group_included: Vec<bool>,
    pub omega: SpdMatrix,
    /// Symmetric 0/1 edge indicators, zero diagonal.
    pub edge_ind: DMatrix<u8>,
    pub pi1: f64,
    pub pi2: f64,
    pub pi3: f64,
    pub sigma_tau2: f64,
    pub sigma2_gauss: DVector<f64>,
    /// Current inverse-gamma scale of the σ_τ² prior.
    pub d: f64,
}

impl ModelState {
    /// Starting point: no coefficients, unit scales, identity precision and
    /// latent values read off the observed responses.
    pub fn initial(data: &MixedResponseDataset, hyper: &Hyperparameters) -> Self {
        let n = data.n();
        let p = data.p();
        let lay = data.layout();
        let q = lay.q();
        let xi = DMatrix::from_fn(n, q, |i, j| {
            let y = data.response(i, j);
            match lay.kind(j) {
                ResponseKind::Continuous => y,
                ResponseKind::Count => (y + 0.5).ln(),
                ResponseKind::Binary => 2.0 * y - 1.0,
            }
        });
        ModelState {
            xi,
            intercept: DVector::zeros(q),
            b_tilde: DMatrix::zeros(p, q),
            tau: DVector::from_element(p, 1.0),
            group_included: vec![true; data.groups.n_groups()],
            omega: SpdMatrix::identity(q),
            edge_ind: DMatrix::zeros(q, q),
            pi1: hyper.a1 / (hyper.a1 + hyper.a2),
            pi2: hyper.a3 / (hyper.a3 + hyper.a4),
            pi3: hyper.a5 / (hyper.a5 + hyper.a6),
            sigma_tau2: 1.0,
            sigma2_gauss: DVector::from_element(lay.l, 1.0),
            d: hyper.d,
        }
    }

    pub fn q(&self) -> usize {
        self.xi.ncols()
    }

    /// Mean of the latent vector for observation `i`: `b₀ + Bᵀxᵢ`.
    pub fn latent_mean(&self, b: &DMatrix<f64>, x_row: &[f64]) -> DVector<f64> {
        let mut m = self.intercept.clone();
        for (r, &xv) in x_row.iter().enumerate() {
            if xv != 0.0 {
                for j in 0..m.len() {
                    m[j] += xv * b[(r, j)];
                }
            }
        }
        m
    }

    /// Checks the support coupling between group flags, `B̃` and `τ`.
    pub fn check_support(&self, groups: &GroupStructure) -> Result<()> {
        for g in 0..groups.n_groups() {
            let zero = groups.range(g).all(|r| self.b_tilde.row(r).iter().all(|&v| v == 0.0));
            if !self.group_included[g] && !zero {
                return Err(Error::Dataset(format!(
                    "group {} is excluded but has non-zero coefficients",
                    g + 1
                )));
            }
        }
        let b = effective_coefficients(self);
        for r in 0..self.tau.len() {
            if self.tau[r] == 0.0 && b.row(r).iter().any(|&v| v != 0.0) {
                return Err(Error::Dataset(format!("row {} has tau = 0 but non-zero B", r + 1)));
            }
            if self.tau[r] < 0.0 {
                return Err(Error::Dataset(format!("row {} has negative tau", r + 1)));
            }
        }
        Ok(())
    }
}

/// `B` with row `j` equal to `τⱼ · B̃[j]`; rows with `τⱼ = 0` are exact zeros.
pub fn effective_coefficients(state: &ModelState) -> DMatrix<f64> {
    let mut b = state.b_tilde.clone();
    for (r, &t) in state.tau.iter().enumerate() {
        if t == 0.0 {
            b.row_mut(r).fill(0.0);
        } else {
            b.row_mut(r).scale_mut(t);
        }
    }
    b
}

/// `Bᵀx`
pub fn linear_predictor(b: &DMatrix<f64>, x: &DVector<f64>) -> Result<DVector<f64>> {
    if b.nrows() != x.len() {
        return Err(Error::Dimension(format!(
            "B has {} rows but x has length {}",
            b.nrows(),
            x.len()
        )));
    }
    Ok(b.tr_mul(x))
}

/// Inverse link outputs of one latent vector.
#[derive(Clone, Debug, PartialEq)]
pub struct LinkValues {
    pub mu: DVector<f64>,
    pub lambda: DVector<f64>,
    pub gamma: DVector<f64>,
}

pub fn logistic(x: f64) -> f64 {
    let x = x.clamp(-LOGIT_CLAMP, LOGIT_CLAMP);
    1.0 / (1.0 + (-x).exp())
}

/// Identity, exp and logistic inverse links over the three response blocks.
pub fn response_links(xi: &DVector<f64>, layout: ResponseLayout) -> Result<LinkValues> {
    if xi.len() != layout.q() {
        return Err(Error::Dimension(format!(
            "latent vector has length {} but l+m+k = {}",
            xi.len(),
            layout.q()
        )));
    }
    let (l, m, k) = (layout.l, layout.m, layout.k);
    let mu = xi.rows(0, l).into_owned();
    let mut lambda = DVector::zeros(m);
    for j in 0..m {
        let v = xi[l + j];
        if v > MAX_COUNT_LATENT {
            return Err(Error::Overflow(format!(
                "count slot {} has latent value {v} > {MAX_COUNT_LATENT}",
                j + 1
            )));
        }
        lambda[j] = v.exp();
    }
    let gamma = DVector::from_fn(k, |j, _| logistic(xi[l + m + j]));
    Ok(LinkValues { mu, lambda, gamma })
}
