use super::mat::Mat;
use crate::error::{LqrError, Result};
use crate::tolerances::Tolerances;

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
/// `b` may hold several right-hand sides.
pub fn solve_linear(a: &Mat, b: &Mat) -> Result<Mat> {
    if !a.is_square() {
        return Err(LqrError::DimensionMismatch(format!(
            "solve_linear needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if b.rows() != a.rows() {
        return Err(LqrError::DimensionMismatch(format!(
            "right-hand side has {} rows, system has {}",
            b.rows(),
            a.rows()
        )));
    }
    let n = a.rows();
    let nrhs = b.cols();
    let threshold = Tolerances::DEFAULT.pivot_rel * a.frob_norm();
    let mut lu = a.clone();
    let mut x = b.clone();

    for k in 0..n {
        let (piv_row, piv) = (k..n)
            .map(|i| (i, lu[(i, k)]))
            .max_by(|x, y| x.1.abs().total_cmp(&y.1.abs()))
            .expect("non-empty column");
        if !(piv.abs() > threshold) {
            return Err(LqrError::Singular {
                pivot: piv.abs(),
                threshold,
            });
        }
        if piv_row != k {
            for j in 0..n {
                let t = lu[(k, j)];
                lu[(k, j)] = lu[(piv_row, j)];
                lu[(piv_row, j)] = t;
            }
            for j in 0..nrhs {
                let t = x[(k, j)];
                x[(k, j)] = x[(piv_row, j)];
                x[(piv_row, j)] = t;
            }
        }
        for i in (k + 1)..n {
            let f = lu[(i, k)] / piv;
            if f == 0.0 {
                continue;
            }
            lu[(i, k)] = 0.0;
            for j in (k + 1)..n {
                lu[(i, j)] -= f * lu[(k, j)];
            }
            for j in 0..nrhs {
                x[(i, j)] -= f * x[(k, j)];
            }
        }
    }

    for j in 0..nrhs {
        for i in (0..n).rev() {
            let mut s = x[(i, j)];
            for k in (i + 1)..n {
                s -= lu[(i, k)] * x[(k, j)];
            }
            x[(i, j)] = s / lu[(i, i)];
        }
    }
    Ok(x)
}

pub fn inverse(a: &Mat) -> Result<Mat> {
    solve_linear(a, &Mat::identity(a.rows()))
}
