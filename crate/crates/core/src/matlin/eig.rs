use super::mat::{Mat, SymMat};
use crate::error::{LqrError, Result};
use crate::tolerances::Tolerances;

/// Spectral decomposition `M = V diag(values) V^T`, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SymEig {
    pub values: Vec<f64>,
    /// Orthogonal; column `k` pairs with `values[k]`.
    pub vectors: Mat,
}

impl SymEig {
    pub fn reconstruct(&self) -> Mat {
        let v = &self.vectors;
        let scaled = {
            let mut s = v.clone();
            for (j, &l) in self.values.iter().enumerate() {
                for i in 0..s.rows() {
                    s[(i, j)] *= l;
                }
            }
            s
        };
        &scaled * &v.transpose()
    }
}

fn off_diagonal_norm(a: &Mat) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for j in 0..n {
        for i in 0..n {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// Cyclic Jacobi eigensolver.
pub fn sym_eig(m: &SymMat) -> Result<SymEig> {
    let tol = Tolerances::DEFAULT;
    let n = m.dim();
    let mut a = m.as_mat().clone();
    let mut v = Mat::identity(n);
    let threshold = tol.jacobi_offdiag_rel * m.frob_norm();

    let mut converged = off_diagonal_norm(&a) <= threshold;
    let mut sweeps = 0;
    while !converged {
        if sweeps == tol.jacobi_max_sweeps {
            return Err(LqrError::NumericalFailure(format!(
                "Jacobi eigensolver did not converge in {sweeps} sweeps"
            )));
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let tau = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + tau.hypot(1.0));
                let t = if tau == 0.0 { 1.0 } else { t };
                let c = 1.0 / t.hypot(1.0);
                let s = t * c;
                // A <- J^T A J
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
        sweeps += 1;
        converged = off_diagonal_norm(&a) <= threshold;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = Mat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for k in 0..n {
            vectors[(k, dst)] = v[(k, src)];
        }
    }
    Ok(SymEig { values, vectors })
}

pub fn min_eig(m: &SymMat) -> Result<f64> {
    Ok(sym_eig(m)?.values[0])
}

pub fn max_eig(m: &SymMat) -> Result<f64> {
    Ok(*sym_eig(m)?.values.last().expect("non-empty"))
}
