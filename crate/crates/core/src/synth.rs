//! Synthetic scenarios: precision structures, coefficient patterns and
//! mixed-response datasets drawn from the model itself.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::dist::{std_normal, std_normal_matrix};
use crate::error::{Error, Result};
use crate::linalg::SpdMatrix;
use crate::model::{logistic, GroupStructure, MixedResponseDataset};

/// Largest count a replicate may contain before it is redrawn.
pub const COUNT_CAP: u64 = 10_000;
const MAX_REDRAWS: usize = 100;
pub const TEST_SIZE: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationScenario {
    pub omega_id: u8,
    pub coeff_id: u8,
    pub n: usize,
    pub n_test: usize,
    pub p: usize,
    pub l: usize,
    pub m: usize,
    pub k: usize,
    pub groups: usize,
    /// Block count for the random block-diagonal precision.
    pub blocks: usize,
    /// Predictor variance.
    pub sigma_x: f64,
    pub l_b: f64,
    pub u_b: f64,
    pub seed: u64,
}

impl SimulationScenario {
    /// The study settings for a precision scenario and coefficient pattern.
    pub fn standard(omega_id: u8, coeff_id: u8, seed: u64) -> Result<Self> {
        let (p, each, groups, blocks) = match coeff_id {
            1 | 2 => (20, 2, 4, 3),
            3 | 4 => (80, 5, 6, 5),
            _ => return Err(Error::Domain(format!("coefficient pattern {coeff_id} is not 1..4"))),
        };
        let s = SimulationScenario {
            omega_id,
            coeff_id,
            n: 100,
            n_test: TEST_SIZE,
            p,
            l: each,
            m: each,
            k: each,
            groups,
            blocks,
            sigma_x: 1.0,
            l_b: 0.3,
            u_b: 0.8,
            seed,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn q(&self) -> usize {
        self.l + self.m + self.k
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=5).contains(&self.omega_id) {
            return Err(Error::Domain(format!(
                "precision scenario {} is not 1..5",
                self.omega_id
            )));
        }
        let shape = match self.coeff_id {
            1 | 2 => (20, 2, 4),
            3 | 4 => (80, 5, 6),
            c => return Err(Error::Domain(format!("coefficient pattern {c} is not 1..4"))),
        };
        let have = (self.p, self.l, self.groups);
        if have != shape || self.m != self.l || self.k != self.l {
            return Err(Error::Domain(format!(
                "pattern {} needs p = {}, l = m = k = {}, G = {}; got p = {}, (l, m, k) = ({}, {}, {}), G = {}",
                self.coeff_id, shape.0, shape.1, shape.2, self.p, self.l, self.m, self.k, self.groups
            )));
        }
        if self.n == 0 || self.n_test == 0 {
            return Err(Error::Domain("training and test sizes must be positive".into()));
        }
        if self.blocks == 0 {
            return Err(Error::Domain("block count must be positive".into()));
        }
        if !(self.sigma_x > 0.0) || !self.sigma_x.is_finite() {
            return Err(Error::Domain(format!("sigma_x must be positive, got {}", self.sigma_x)));
        }
        if !(self.l_b < self.u_b) || !self.l_b.is_finite() || !self.u_b.is_finite() {
            return Err(Error::Domain(format!(
                "need l_b < u_b, got ({}, {})",
                self.l_b, self.u_b
            )));
        }
        Ok(())
    }
}

fn banded(q: usize) -> DMatrix<f64> {
    DMatrix::from_fn(q, q, |i, j| match i.abs_diff(j) {
        0 => 1.0,
        1 => 0.5,
        2 => 0.3,
        3 => 0.1,
        _ => 0.0,
    })
}

/// Permutation used by scenario 2: `perm[i]` is the source index of row `i`.
pub fn draw_permutation<R: Rng + ?Sized>(q: usize, rng: &mut R) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..q).collect();
    perm.shuffle(rng);
    perm
}

/// Random assignment of `0..q` into `blocks` groups whose sizes differ by at
/// most one; the first `q mod blocks` groups are the larger ones.
pub fn draw_blocks<R: Rng + ?Sized>(q: usize, blocks: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let perm = draw_permutation(q, rng);
    let (base, extra) = (q / blocks, q % blocks);
    let mut out = Vec::with_capacity(blocks);
    let mut at = 0;
    for b in 0..blocks {
        let size = base + usize::from(b < extra);
        let mut g = perm[at..at + size].to_vec();
        g.sort_unstable();
        out.push(g);
        at += size;
    }
    out
}

/// Precision scenarios 1–5.
pub fn make_omega<R: Rng + ?Sized>(omega_id: u8, q: usize, blocks: usize, rng: &mut R) -> Result<SpdMatrix> {
    if q == 0 {
        return Err(Error::Domain("q must be positive".into()));
    }
    let m = match omega_id {
        1 => banded(q),
        2 => {
            let b = banded(q);
            let perm = draw_permutation(q, rng);
            DMatrix::from_fn(q, q, |i, j| b[(perm[i], perm[j])])
        }
        3 => DMatrix::from_fn(q, q, |i, j| 0.5f64.powi(i.abs_diff(j) as i32)),
        4 => {
            if blocks == 0 || blocks > q {
                return Err(Error::Domain(format!(
                    "cannot split {q} responses into {blocks} blocks"
                )));
            }
            let mut label = vec![0; q];
            for (b, members) in draw_blocks(q, blocks, rng).iter().enumerate() {
                for &i in members {
                    label[i] = b;
                }
            }
            DMatrix::from_fn(q, q, |i, j| {
                if i == j {
                    1.0
                } else if label[i] == label[j] {
                    0.4
                } else {
                    0.0
                }
            })
        }
        5 => {
            if q < 4 {
                return Err(Error::Domain(format!("scenario 5 needs q >= 4, got {q}")));
            }
            DMatrix::from_fn(q, q, |i, j| {
                if i == j {
                    1.0
                } else if i < 4 && j < 4 {
                    0.5
                } else {
                    0.0
                }
            })
        }
        _ => return Err(Error::Domain(format!("precision scenario {omega_id} is not 1..5"))),
    };
    SpdMatrix::new(m)
}

/// True coefficients, their support and the predictor groups.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientPattern {
    pub b: DMatrix<f64>,
    pub support: DMatrix<u8>,
    pub group_sizes: Vec<usize>,
}

/// Zero-based non-zero rows and group sizes of patterns 1–4.
pub fn pattern_layout(coeff_id: u8) -> Result<(Vec<usize>, Vec<usize>)> {
    let rows: Vec<usize> = match coeff_id {
        1 => vec![1, 2, 5, 11, 12, 15],
        2 => vec![6, 7, 10, 11, 12, 15],
        3 => (6..=10).chain(31..=35).chain(51..=55).collect(),
        4 => (26..=30).chain(31..=35).chain(41..=45).collect(),
        _ => return Err(Error::Domain(format!("coefficient pattern {coeff_id} is not 1..4"))),
    };
    let sizes = match coeff_id {
        1 | 2 => vec![5; 4],
        3 => vec![10, 20, 10, 10, 20, 10],
        _ => vec![20, 10, 10, 20, 10, 10],
    };
    Ok((rows.into_iter().map(|r| r - 1).collect(), sizes))
}

/// Coefficient patterns 1–4 for `q` responses; non-zero rows are filled with
/// i.i.d. `Unif(l_b, u_b)` draws.
pub fn make_coefficients<R: Rng + ?Sized>(
    coeff_id: u8,
    q: usize,
    l_b: f64,
    u_b: f64,
    rng: &mut R,
) -> Result<CoefficientPattern> {
    if !(l_b < u_b) {
        return Err(Error::Domain(format!("need l_b < u_b, got ({l_b}, {u_b})")));
    }
    let (rows, group_sizes) = pattern_layout(coeff_id)?;
    let p: usize = group_sizes.iter().sum();
    let mut b = DMatrix::zeros(p, q);
    let mut support = DMatrix::zeros(p, q);
    for &r in &rows {
        for j in 0..q {
            b[(r, j)] = rng.random_range(l_b..u_b);
            support[(r, j)] = 1;
        }
    }
    Ok(CoefficientPattern {
        b,
        support,
        group_sizes,
    })
}

/// Generating values of a simulated replicate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub scenario: SimulationScenario,
    pub b: DMatrix<f64>,
    pub omega: DMatrix<f64>,
    pub support: DMatrix<u8>,
    pub group_sizes: Vec<usize>,
    pub train_latent: DMatrix<f64>,
    pub test_latent: DMatrix<f64>,
}

impl Truth {
    /// Symmetric 0/1 edge set of the true precision, zero diagonal.
    pub fn edge_support(&self) -> DMatrix<u8> {
        let q = self.omega.nrows();
        DMatrix::from_fn(q, q, |i, j| u8::from(i != j && self.omega[(i, j)] != 0.0))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulatedData {
    pub train: MixedResponseDataset,
    pub test: MixedResponseDataset,
    pub truth: Truth,
}

struct Draws {
    x: DMatrix<f64>,
    xi: DMatrix<f64>,
    u: DMatrix<f64>,
    z: DMatrix<u64>,
    w: DMatrix<u8>,
}

/// Draws `n` rows from the model with unit Gaussian response variance.
/// Returns `None` if a count exceeds [`COUNT_CAP`].
fn draw_rows<R: Rng + ?Sized>(
    n: usize,
    b: &DMatrix<f64>,
    omega_chol: &crate::linalg::CholeskyFactor,
    (l, m, k): (usize, usize, usize),
    sigma_x: f64,
    rng: &mut R,
) -> Result<Option<Draws>> {
    let (p, q) = b.shape();
    let x = std_normal_matrix(n, p, rng) * sigma_x.sqrt();
    let eps = omega_chol.inv_upper_apply(&std_normal_matrix(q, n, rng)).transpose();
    let xi = &x * b + eps;
    let mut u = DMatrix::zeros(n, l);
    let mut z = DMatrix::zeros(n, m);
    let mut w = DMatrix::zeros(n, k);
    for i in 0..n {
        for j in 0..l {
            u[(i, j)] = xi[(i, j)] + std_normal(rng);
        }
        for j in 0..m {
            let rate = xi[(i, l + j)].exp();
            if !rate.is_finite() || rate > COUNT_CAP as f64 * 10.0 {
                return Ok(None);
            }
            let c = if rate > 0.0 {
                let d = Poisson::new(rate).map_err(|e| Error::Domain(format!("poisson({rate}): {e}")))?;
                d.sample(rng) as u64
            } else {
                0
            };
            if c > COUNT_CAP {
                return Ok(None);
            }
            z[(i, j)] = c;
        }
        for j in 0..k {
            let prob = logistic(xi[(i, l + m + j)]);
            w[(i, j)] = u8::from(rng.random::<f64>() < prob);
        }
    }
    Ok(Some(Draws { x, xi, u, z, w }))
}

/// Draws a training and a test set from a scenario, redrawing whole
/// replicates whose counts exceed [`COUNT_CAP`].
pub fn generate_dataset<R: Rng + ?Sized>(scenario: &SimulationScenario, rng: &mut R) -> Result<SimulatedData> {
    scenario.validate()?;
    let q = scenario.q();
    let omega = make_omega(scenario.omega_id, q, scenario.blocks, rng)?;
    let coef = make_coefficients(scenario.coeff_id, q, scenario.l_b, scenario.u_b, rng)?;
    generate_with(scenario, omega, coef, rng)
}

/// Same as [`generate_dataset`] with a given precision and coefficients.
pub fn generate_with<R: Rng + ?Sized>(
    scenario: &SimulationScenario,
    omega: SpdMatrix,
    coef: CoefficientPattern,
    rng: &mut R,
) -> Result<SimulatedData> {
    let chol = omega.cholesky()?;
    let blocks = (scenario.l, scenario.m, scenario.k);
    let groups = GroupStructure::new(coef.group_sizes.clone())?;
    if groups.p() != coef.b.nrows() || coef.b.ncols() != scenario.q() {
        return Err(Error::Dimension(format!(
            "coefficients are {}x{}, scenario needs {}x{}",
            coef.b.nrows(),
            coef.b.ncols(),
            groups.p(),
            scenario.q()
        )));
    }
    for _ in 0..MAX_REDRAWS {
        let Some(train) = draw_rows(scenario.n, &coef.b, &chol, blocks, scenario.sigma_x, rng)? else {
            continue;
        };
        let Some(test) = draw_rows(scenario.n_test, &coef.b, &chol, blocks, scenario.sigma_x, rng)? else {
            continue;
        };
        let build = |d: Draws| -> Result<(MixedResponseDataset, DMatrix<f64>)> {
            Ok((MixedResponseDataset::new(d.x, d.u, d.z, d.w, groups.clone())?, d.xi))
        };
        let (train, train_latent) = build(train)?;
        let (test, test_latent) = build(test)?;
        let truth = Truth {
            scenario: scenario.clone(),
            b: coef.b,
            omega: omega.into_inner(),
            support: coef.support,
            group_sizes: coef.group_sizes,
            train_latent,
            test_latent,
        };
        return Ok(SimulatedData { train, test, truth });
    }
    Err(Error::Overflow(format!(
        "every one of {MAX_REDRAWS} draws produced a count above {COUNT_CAP}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn scenario_three_small() {
        let mut rng = RngStream::new(0, 0);
        let o = make_omega(3, 3, 1, &mut rng).unwrap();
        let want = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.25, 0.5, 1.0, 0.5, 0.25, 0.5, 1.0]);
        assert_eq!(o.as_matrix(), &want);
    }

    #[test]
    fn scenario_one_band() {
        let mut rng = RngStream::new(0, 0);
        let o = make_omega(1, 6, 1, &mut rng).unwrap();
        assert_eq!(o.as_matrix()[(0, 3)], 0.1);
        assert_eq!(o.as_matrix()[(0, 4)], 0.0);
        for q in 1..40 {
            assert!(make_omega(1, q, 1, &mut rng).is_ok(), "q = {q}");
        }
    }

    #[test]
    fn scenario_two_is_permuted_scenario_one() {
        let mut a = RngStream::new(5, 0);
        let mut b = RngStream::new(5, 0);
        let o2 = make_omega(2, 6, 1, &mut a).unwrap();
        let perm = draw_permutation(6, &mut b);
        let o1 = banded(6);
        let mut pm = DMatrix::zeros(6, 6);
        for (i, &s) in perm.iter().enumerate() {
            pm[(i, s)] = 1.0;
        }
        assert_eq!(o2.as_matrix(), &(&pm * o1 * pm.transpose()));
    }

    #[test]
    fn scenario_four_blocks() {
        let mut rng = RngStream::new(2, 0);
        let blocks = draw_blocks(7, 3, &mut rng);
        let sizes: Vec<usize> = blocks.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![3, 2, 2]);
        let o = make_omega(4, 15, 5, &mut rng).unwrap();
        let zeros_per_row: Vec<usize> = (0..15)
            .map(|i| o.as_matrix().row(i).iter().filter(|&&v| v == 0.4).count())
            .collect();
        assert!(zeros_per_row.iter().all(|&c| c == 2));
        assert!(make_omega(4, 3, 4, &mut rng).is_err());
    }

    #[test]
    fn scenario_five() {
        let mut rng = RngStream::new(0, 0);
        let o = make_omega(5, 6, 1, &mut rng).unwrap();
        assert_eq!(o.as_matrix()[(0, 3)], 0.5);
        assert_eq!(o.as_matrix()[(3, 4)], 0.0);
        assert!(make_omega(5, 3, 1, &mut rng).is_err());
    }

    #[test]
    fn pattern_supports() {
        let mut rng = RngStream::new(1, 0);
        let c = make_coefficients(1, 6, 0.3, 0.8, &mut rng).unwrap();
        let rows: Vec<usize> = (0..20).filter(|&r| c.support[(r, 0)] == 1).map(|r| r + 1).collect();
        assert_eq!(rows, vec![1, 2, 5, 11, 12, 15]);
        assert!(c.b.iter().all(|&v| v == 0.0 || (0.3..0.8).contains(&v)));
        assert_eq!(c.support, c.b.map(|v| u8::from(v != 0.0)));
        for id in 3..=4 {
            let c = make_coefficients(id, 15, 0.3, 0.8, &mut rng).unwrap();
            assert_eq!(c.group_sizes.iter().sum::<usize>(), 80);
            assert_eq!(c.support.iter().filter(|&&s| s == 1).count(), 15 * 15);
        }
    }

    #[test]
    fn scenario_shape_rules() {
        let mut s = SimulationScenario::standard(1, 1, 0).unwrap();
        s.p = 21;
        assert!(s.validate().is_err());
        assert!(SimulationScenario::standard(6, 1, 0).is_err());
        assert!(SimulationScenario::standard(1, 5, 0).is_err());
    }

    #[test]
    fn generated_sets_have_expected_shapes() {
        let s = SimulationScenario::standard(1, 1, 3).unwrap();
        let mut rng = RngStream::new(3, 0);
        let d = generate_dataset(&s, &mut rng).unwrap();
        assert_eq!((d.train.n(), d.train.p(), d.train.q()), (100, 20, 6));
        assert_eq!(d.test.n(), 100);
        assert!(d.train.z.iter().all(|&c| c <= COUNT_CAP));
    }
}
