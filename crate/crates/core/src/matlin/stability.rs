use super::eig::{max_eig, min_eig, sym_eig};
use super::lyap::dlyap;
use super::mat::{Mat, SymMat};
use crate::error::{LqrError, Result};
use crate::tolerances::Tolerances;

/// Outcome of the discrete Lyapunov stability test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    Stable,
    Unstable,
    /// `P(X)` was singular: an eigenvalue product equals one, typically an
    /// eigenvalue on the unit circle.
    Marginal,
}

impl Stability {
    pub fn is_stable(self) -> bool {
        self == Stability::Stable
    }
}

/// Schur stability via the Lyapunov criterion: `M` is stable iff
/// `M^T Y M - Y = -I` has a positive definite solution.
pub fn schur_stability(m: &Mat) -> Stability {
    assert!(m.is_square(), "stability test needs a square matrix");
    if !m.is_finite() {
        return Stability::Unstable;
    }
    let y = match dlyap(m, &SymMat::identity(m.rows())) {
        Ok(y) => y,
        Err(_) => return Stability::Marginal,
    };
    match min_eig(&y) {
        Ok(l) if l > Tolerances::DEFAULT.pd_min_eig => Stability::Stable,
        Ok(_) => Stability::Unstable,
        Err(_) => Stability::Marginal,
    }
}

pub fn is_schur_stable(m: &Mat) -> bool {
    schur_stability(m).is_stable()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralRadiusEstimate {
    pub value: f64,
    /// Power at which the estimate was taken.
    pub power: usize,
    pub overflow: bool,
}

/// `ln ||M^k||_F`, or `None` when `M^k = 0`. Products are renormalized so
/// that large powers of unstable matrices do not overflow.
fn log_norm_power(m: &Mat, mut k: usize) -> Option<f64> {
    let n = m.rows();
    let mut acc = Mat::identity(n);
    let mut acc_log = 0.0;
    let mut acc_is_identity = true;
    let base_norm = m.frob_norm();
    if base_norm == 0.0 {
        return None;
    }
    let mut base = m.scale(1.0 / base_norm);
    let mut base_log = base_norm.ln();
    loop {
        if k & 1 == 1 {
            if acc_is_identity {
                acc = base.clone();
                acc_log = base_log;
                acc_is_identity = false;
            } else {
                let prod = &acc * &base;
                let pn = prod.frob_norm();
                if pn == 0.0 {
                    return None;
                }
                acc = prod.scale(1.0 / pn);
                acc_log += base_log + pn.ln();
            }
        }
        k >>= 1;
        if k == 0 {
            break;
        }
        let sq = &base * &base;
        let sn = sq.frob_norm();
        if sn == 0.0 {
            return None;
        }
        base = sq.scale(1.0 / sn);
        base_log = 2.0 * base_log + sn.ln();
    }
    Some(acc_log)
}

/// Gelfand estimate `||M^k||_F^(1/k)` of the spectral radius.
///
/// Starting at `k`, the power is doubled until two successive estimates
/// differ by less than 1e-4 or the power reaches 2^14. Convergence is
/// `O(log(C)/k)` in general and can be slow for defective matrices, so the
/// value is a diagnostic only; stability decisions use [`schur_stability`].
pub fn spectral_radius_estimate(m: &Mat, k: usize) -> Result<SpectralRadiusEstimate> {
    if !m.is_square() {
        return Err(LqrError::DimensionMismatch("spectral radius of non-square matrix".into()));
    }
    if k < 8 {
        return Err(LqrError::InvalidParameter(format!("power must be at least 8, got {k}")));
    }
    if !m.is_finite() {
        return Ok(SpectralRadiusEstimate {
            value: f64::INFINITY,
            power: k,
            overflow: true,
        });
    }
    let tol = Tolerances::DEFAULT;
    let estimate = |k: usize| match log_norm_power(m, k) {
        None => 0.0,
        Some(l) => (l / k as f64).exp(),
    };
    let mut k = k;
    let mut prev = estimate(k);
    while k < tol.gelfand_max_power {
        let next_k = (2 * k).min(tol.gelfand_max_power);
        let next = estimate(next_k);
        k = next_k;
        let done = (next - prev).abs() < tol.gelfand_rel_change;
        prev = next;
        if done {
            break;
        }
    }
    let overflow = !prev.is_finite();
    Ok(SpectralRadiusEstimate {
        value: if overflow { f64::INFINITY } else { prev },
        power: k,
        overflow,
    })
}

/// Induced 2-norm, `sqrt(lambda_max(M^T M))`.
pub fn spectral_norm(m: &Mat) -> Result<f64> {
    let g = SymMat::symmetrize(&m.tr_mul(m));
    Ok(max_eig(&g)?.max(0.0).sqrt())
}

/// Weighted norm `sqrt(lambda_max(M^T P_eps M))` for `0 < P_eps <= I`.
pub fn peps_norm(m: &Mat, peps: &SymMat) -> Result<f64> {
    let tol = Tolerances::DEFAULT;
    if m.rows() != peps.dim() {
        return Err(LqrError::DimensionMismatch(format!(
            "peps_norm: M has {} rows, P_eps is {}x{}",
            m.rows(),
            peps.dim(),
            peps.dim()
        )));
    }
    let e = sym_eig(peps)?;
    let lo = e.values[0];
    let hi = *e.values.last().expect("non-empty");
    if !(lo > tol.peps_lower) || !(hi <= 1.0 + tol.peps_upper_slack) {
        return Err(LqrError::ContractViolation(format!(
            "P_eps must satisfy 0 < P_eps <= I, eigenvalues span [{lo:e}, {hi:e}]"
        )));
    }
    let g = peps.congruence(m);
    Ok(max_eig(&g)?.max(0.0).sqrt())
}
