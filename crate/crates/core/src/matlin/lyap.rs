use super::mat::{Mat, SymMat};
use super::solve::solve_linear;
use crate::error::{LqrError, Result};

/// `P(X) = X^T (x) X^T - I (x) I`, so that `vec(X^T Y X - Y) = P(X) vec(Y)`.
pub fn pmat(x: &Mat) -> Mat {
    assert!(x.is_square(), "pmat needs a square matrix");
    let xt = x.transpose();
    let n = x.rows();
    &xt.kron(&xt) - &Mat::identity(n * n)
}

/// The discrete Lyapunov operator `X^T Y X - Y`.
pub fn lyap_operator(x: &Mat, y: &Mat) -> Mat {
    &x.tr_mul(&y.matmul(x)) - y
}

/// Solves `X^T Y X - Y = -W` for symmetric `Y` through the vectorized
/// system `P(X) vec(Y) = vec(-W)`.
///
/// Fails with [`LqrError::NoUniqueSolution`] when `P(X)` is singular, which
/// happens exactly when two eigenvalues of `X` multiply to one.
pub fn dlyap(x: &Mat, w: &SymMat) -> Result<SymMat> {
    if !x.is_square() || x.rows() != w.dim() {
        return Err(LqrError::DimensionMismatch(format!(
            "dlyap: X is {}x{}, W is {}x{}",
            x.rows(),
            x.cols(),
            w.dim(),
            w.dim()
        )));
    }
    let n = x.rows();
    let rhs = (-w.as_mat()).vec();
    let y = match solve_linear(&pmat(x), &rhs) {
        Ok(y) => y,
        Err(LqrError::Singular { .. }) => return Err(LqrError::NoUniqueSolution),
        Err(e) => return Err(e),
    };
    Ok(SymMat::symmetrize(&Mat::unvec(&y, n, n)?))
}
