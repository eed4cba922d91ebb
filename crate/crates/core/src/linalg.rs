//! Small dense linear-algebra helpers shared by the estimation code.

use nalgebra::{DMatrix, DVector, RowDVector, SymmetricEigen};
#[allow(unused_imports)] // inherent when std is linked
use num_traits::Float;

use crate::error::{Error, Result};

pub type Vector = DVector<f64>;
pub type RowVector = RowDVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Returns `(m + mᵀ) / 2`.
pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// Smallest eigenvalue of the symmetric part of `m`.
pub fn min_eigenvalue(m: &Matrix) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(symmetrize(m)).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Checks that `m` is square, symmetric within `sym_tol` and has no eigenvalue below `-psd_tol`.
pub fn check_covariance(m: &Matrix, sym_tol: f64, psd_tol: f64) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::InvalidCovariance("matrix is not square"));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidCovariance("non-finite entry"));
    }
    let scale = m.amax().max(1.0);
    if (m - m.transpose()).amax() > sym_tol * scale {
        return Err(Error::InvalidCovariance("matrix is not symmetric"));
    }
    if min_eigenvalue(m) < -psd_tol {
        return Err(Error::InvalidCovariance("matrix is not positive semi-definite"));
    }
    Ok(())
}

/// Symmetric square root factor `L` with `L Lᵀ = m`, clipping negative eigenvalues to zero.
///
/// Works for singular (including all-zero) covariances, unlike a Cholesky factor.
pub fn psd_sqrt(m: &Matrix) -> Matrix {
    if m.nrows() == 0 {
        return Matrix::zeros(0, 0);
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * Matrix::from_diagonal(&roots)
}

fn fd_step(v: f64) -> f64 {
    1e-6 * v.abs().max(1.0)
}

/// Central-difference Jacobian of `f` at `x`.
pub fn fd_jacobian<F>(f: F, x: &Vector) -> Matrix
where
    F: Fn(&Vector) -> Vector,
{
    let n = x.len();
    let mut cols: Option<Matrix> = None;
    let mut xp = x.clone();
    for j in 0..n {
        let h = fd_step(x[j]);
        xp[j] = x[j] + h;
        let fp = f(&xp);
        xp[j] = x[j] - h;
        let fm = f(&xp);
        xp[j] = x[j];
        let jac = cols.get_or_insert_with(|| Matrix::zeros(fp.len(), n));
        jac.set_column(j, &((fp - fm) / (2.0 * h)));
    }
    cols.unwrap_or_else(|| Matrix::zeros(f(x).len(), 0))
}

/// Central-difference gradient (as a row) of a scalar function.
pub fn fd_gradient<F>(f: F, x: &Vector) -> RowVector
where
    F: Fn(&Vector) -> f64,
{
    let mut xp = x.clone();
    RowVector::from_fn(x.len(), |_, j| {
        let h = fd_step(x[j]);
        xp[j] = x[j] + h;
        let fp = f(&xp);
        xp[j] = x[j] - h;
        let fm = f(&xp);
        xp[j] = x[j];
        (fp - fm) / (2.0 * h)
    })
}

/// Central-difference derivative of a scalar function of one variable.
pub fn fd_derivative<F>(f: F, t: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    let h = fd_step(t);
    (f(t + h) - f(t - h)) / (2.0 * h)
}

/// Central-difference derivative of a vector-valued function of one variable.
pub fn fd_vector_derivative<F>(f: F, t: f64) -> Vector
where
    F: Fn(f64) -> Vector,
{
    let h = fd_step(t);
    (f(t + h) - f(t - h)) / (2.0 * h)
}

/// Largest entry-wise relative error `|a - b| / max(1, |b|)`.
pub fn max_relative_error(a: &Matrix, b: &Matrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs() / y.abs().max(1.0)).fold(0.0, f64::max)
}
