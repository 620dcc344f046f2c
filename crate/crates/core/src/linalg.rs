//! Dense symmetric positive-definite kernels.
//!
//! Every inverse in the sampler goes through a Cholesky factor. The
//! factorization reports the first failing pivot instead of returning `None`
//! so callers can name the offending column or group.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance for the symmetry check.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Pivots at or below this fraction of the largest diagonal entry are
/// treated as singular.
pub const PIVOT_RTOL: f64 = 1e-12;

/// Lower Cholesky factor `L` with `L Lᵀ = A`.
#[derive(Clone, Debug)]
pub struct CholeskyFactor {
    l: DMatrix<f64>,
}

impl CholeskyFactor {
    pub fn l(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn into_l(self) -> DMatrix<f64> {
        self.l
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// `log |A|`
    pub fn log_det(&self) -> f64 {
        2.0 * self.l.diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    /// Solves `L x = b` in place.
    pub fn solve_lower_mut(&self, b: &mut DMatrix<f64>) {
        let n = self.dim();
        for c in 0..b.ncols() {
            for i in 0..n {
                let mut s = b[(i, c)];
                for k in 0..i {
                    s -= self.l[(i, k)] * b[(k, c)];
                }
                b[(i, c)] = s / self.l[(i, i)];
            }
        }
    }

    /// Solves `Lᵀ x = b` in place.
    pub fn solve_upper_mut(&self, b: &mut DMatrix<f64>) {
        let n = self.dim();
        for c in 0..b.ncols() {
            for i in (0..n).rev() {
                let mut s = b[(i, c)];
                for k in i + 1..n {
                    s -= self.l[(k, i)] * b[(k, c)];
                }
                b[(i, c)] = s / self.l[(i, i)];
            }
        }
    }

    /// Solves `A X = B`.
    pub fn solve(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        let mut x = rhs.clone();
        self.solve_lower_mut(&mut x);
        self.solve_upper_mut(&mut x);
        x
    }

    pub fn solve_vec(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let m = DMatrix::from_column_slice(rhs.len(), 1, rhs.as_slice());
        DVector::from_column_slice(self.solve(&m).as_slice())
    }

    /// `A⁻¹`, symmetrized.
    pub fn inverse(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut inv = self.solve(&DMatrix::identity(n, n));
        symmetrize(&mut inv);
        inv
    }

    /// `L⁻ᵀ z`: maps i.i.d. standard normals to draws with covariance `A⁻¹`.
    pub fn inv_upper_apply(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        let mut x = z.clone();
        self.solve_upper_mut(&mut x);
        x
    }
}

/// Cholesky factorization with an explicit pivot check.
pub fn cholesky(m: &DMatrix<f64>) -> Result<CholeskyFactor> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "cholesky of a {}x{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    let n = m.nrows();
    let scale = m.diagonal().iter().fold(0.0f64, |acc, d| acc.max(d.abs()));
    let floor = PIVOT_RTOL * scale;
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > floor) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite { pivot: j, value: d });
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in j + 1..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(CholeskyFactor { l })
}

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

pub fn check_symmetric(m: &DMatrix<f64>, tol: f64) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    for i in 0..m.nrows() {
        for j in i + 1..m.ncols() {
            let diff = (m[(i, j)] - m[(j, i)]).abs();
            if !(diff <= tol) {
                return Err(Error::NotSymmetric { row: i, col: j, diff });
            }
        }
    }
    Ok(())
}

/// A symmetric positive-definite matrix. Construction verifies both
/// properties.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DMatrix<f64>", into = "DMatrix<f64>")]
pub struct SpdMatrix(DMatrix<f64>);

impl SpdMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        check_symmetric(&m, SYMMETRY_TOL)?;
        cholesky(&m)?;
        Ok(SpdMatrix(m))
    }

    pub fn identity(dim: usize) -> Self {
        SpdMatrix(DMatrix::identity(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn cholesky(&self) -> Result<CholeskyFactor> {
        cholesky(&self.0)
    }
}

impl TryFrom<DMatrix<f64>> for SpdMatrix {
    type Error = Error;

    fn try_from(m: DMatrix<f64>) -> Result<Self> {
        SpdMatrix::new(m)
    }
}

impl From<SpdMatrix> for DMatrix<f64> {
    fn from(m: SpdMatrix) -> Self {
        m.0
    }
}

pub fn spd_inverse(m: &SpdMatrix) -> Result<SpdMatrix> {
    let inv = m.cholesky()?.inverse();
    SpdMatrix::new(inv)
}

pub fn spd_solve(m: &SpdMatrix, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if rhs.nrows() != m.dim() {
        return Err(Error::Dimension(format!(
            "solve with a {}x{} matrix and {} right-hand rows",
            m.dim(),
            m.dim(),
            rhs.nrows()
        )));
    }
    Ok(m.cholesky()?.solve(rhs))
}

/// Largest absolute entry.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}
