//! Dense linear algebra on top of `nalgebra`.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::data::Covariates;
use crate::error::{Error, Result};

/// Sample covariance (`N - 1` denominator) of the columns of `x`.
pub fn covariance(x: &Covariates) -> DMatrix<f64> {
    let n = x.n_rows();
    let k = x.n_cols();
    let means: Vec<f64> = x.columns().map(|c| c.iter().sum::<f64>() / n as f64).collect();
    let mut cov = DMatrix::zeros(k, k);
    for a in 0..k {
        for b in a..k {
            let (ca, cb) = (x.column(a), x.column(b));
            let s: f64 = ca.iter().zip(cb).map(|(u, v)| (u - means[a]) * (v - means[b])).sum();
            let s = s / (n as f64 - 1.0);
            cov[(a, b)] = s;
            cov[(b, a)] = s;
        }
    }
    cov
}

/// Moore-Penrose inverse of a symmetric matrix.
pub struct SymmetricPinv {
    pub inverse: DMatrix<f64>,
    pub rank: usize,
}

impl SymmetricPinv {
    pub fn is_full_rank(&self) -> bool {
        self.rank == self.inverse.nrows()
    }
}

/// Eigenvalues below `rel_tol * max |eigenvalue|` are treated as zero.
pub fn symmetric_pinv(m: &DMatrix<f64>, rel_tol: f64) -> SymmetricPinv {
    let k = m.nrows();
    if k == 0 {
        return SymmetricPinv { inverse: DMatrix::zeros(0, 0), rank: 0 };
    }
    let eig = m.clone().symmetric_eigen();
    let largest = eig.eigenvalues.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let tol = rel_tol * largest;
    let mut inv = DMatrix::zeros(k, k);
    let mut rank = 0;
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda.abs() > tol && lambda.abs() > 0.0 {
            rank += 1;
            let v = eig.eigenvectors.column(j);
            inv += (v * v.transpose()) / lambda;
        }
    }
    SymmetricPinv { inverse: inv, rank }
}

/// Symmetric square root of the pseudo-inverse, so that
/// `|P a - P b|^2 = (a - b)' M+ (a - b)`.
pub fn pinv_sqrt(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let k = m.nrows();
    let mut out = DMatrix::zeros(k, k);
    if k == 0 {
        return out;
    }
    let eig = m.clone().symmetric_eigen();
    let largest = eig.eigenvalues.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > rel_tol * largest && lambda > 0.0 {
            let v = eig.eigenvectors.column(j);
            out += (v * v.transpose()) / crate::math::sqrt(lambda);
        }
    }
    out
}

/// Least-squares fit via thin QR.
pub struct QrLeastSquares {
    q: DMatrix<f64>,
    r_inv: DMatrix<f64>,
    n: usize,
    p: usize,
}

impl QrLeastSquares {
    /// Fails with [`Error::RankDeficientDesign`] when some `|R_jj|` falls
    /// below `rel_tol * max |R_jj|`.
    pub fn new(design: DMatrix<f64>, rel_tol: f64) -> Result<Self> {
        let (n, p) = design.shape();
        if n <= p {
            return Err(Error::RankDeficientDesign);
        }
        let qr = design.qr();
        let r = qr.r();
        let scale = (0..p).fold(0.0_f64, |a, j| a.max(r[(j, j)].abs()));
        if (0..p).any(|j| !(r[(j, j)].abs() > rel_tol * scale)) {
            return Err(Error::RankDeficientDesign);
        }
        let r_inv = r.solve_upper_triangular(&DMatrix::identity(p, p)).ok_or(Error::RankDeficientDesign)?;
        Ok(QrLeastSquares { q: qr.q(), r_inv, n, p })
    }

    pub fn coefficients(&self, y: &[f64]) -> DVector<f64> {
        let qty = self.q.tr_mul(&DVector::from_column_slice(y));
        &self.r_inv * qty
    }

    /// Single coefficient `j`, cheaper than the full vector.
    pub fn coefficient(&self, j: usize, y: &[f64]) -> f64 {
        let qty = self.q.tr_mul(&DVector::from_column_slice(y));
        self.r_inv.row(j).iter().zip(qty.iter()).map(|(a, b)| a * b).sum()
    }

    /// Homoskedastic standard error of coefficient `j`.
    pub fn standard_error(&self, j: usize, y: &[f64]) -> f64 {
        let yv = DVector::from_column_slice(y);
        let fitted = &self.q * self.q.tr_mul(&yv);
        let rss = (yv - fitted).norm_squared();
        let sigma2 = rss / (self.n - self.p) as f64;
        let row_norm2: f64 = self.r_inv.row(j).iter().map(|v| v * v).sum();
        crate::math::sqrt(sigma2 * row_norm2)
    }
}
