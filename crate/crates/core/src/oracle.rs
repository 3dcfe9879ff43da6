//! Independent ground truth for the solvers.
//!
//! [`solve_dare_bruteforce`] runs value iteration from zero to a
//! machine-level fixed point using only the `matlin` primitives, so it shares
//! no update code with the solvers it is used to check. Certification goes
//! through [`dare_residual`] and [`is_stabilizing_kernel`].

use crate::error::{LqrError, Result};
use crate::lqr::{dare_residual, is_stabilizing_kernel, Gain, Kernel, LqrProblem};
use crate::matlin::{solve_linear, Mat, SymMat};

pub const BRUTEFORCE_MAX_ITER: usize = 1_000_000;

/// DARE solution with its certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct CertifiedSolution {
    pub p_star: Kernel,
    pub k_star: Gain,
    pub residual: f64,
    pub iterations_used: usize,
}

fn riccati_step(a: &Mat, b: &Mat, q: &Mat, r: &Mat, p: &Mat) -> Result<Mat> {
    let at = a.transpose();
    let bt = b.transpose();
    let atp = &at * p;
    let btp = &bt * p;
    let gram = r + &(&btp * b);
    let btpa = &btp * a;
    let x = solve_linear(&gram, &btpa)?;
    let correction = &(&atp * b) * &x;
    let next = &(q + &(&atp * a)) - &correction;
    Ok(SymMat::symmetrize(&next).into_mat())
}

fn oracle_gain(a: &Mat, b: &Mat, r: &Mat, p: &Mat) -> Result<Mat> {
    let btp = &b.transpose() * p;
    let gram = r + &(&btp * b);
    Ok(solve_linear(&gram, &(&btp * a))?.scale(-1.0))
}

/// Value iteration from `P = 0` until the step stops shrinking at roundoff
/// level, then certified (`residual <= 1e-9 max(1, ||Q||_F)`, closed loop
/// Schur stable).
pub fn solve_dare_bruteforce(prob: &LqrProblem) -> Result<CertifiedSolution> {
    let (a, b) = (prob.a(), prob.b());
    let (q, r) = (prob.q().as_mat(), prob.r().as_mat());
    let n = prob.n_states();

    let mut p = Mat::zeros(n, n);
    let mut best_step = f64::INFINITY;
    let mut best_at = 0usize;
    let mut iterations = 0usize;
    loop {
        if iterations == BRUTEFORCE_MAX_ITER {
            return Err(LqrError::NotConverged(format!(
                "brute-force value iteration did not settle in {BRUTEFORCE_MAX_ITER} steps; \
                 the pair may not be stabilizable"
            )));
        }
        let next = riccati_step(a, b, q, r, &p)?;
        iterations += 1;
        if !next.is_finite() {
            return Err(LqrError::NotConverged(format!(
                "brute-force value iteration diverged after {iterations} steps; \
                 the pair is not stabilizable"
            )));
        }
        let step = (&next - &p).frob_norm();
        p = next;
        let scale = p.frob_norm().max(1.0);
        if step <= 1e-15 * scale {
            break;
        }
        if step < best_step {
            best_step = step;
            best_at = iterations;
        } else if iterations - best_at > 500 && best_step <= 1e-11 * scale {
            // stalled on the roundoff floor
            break;
        }
    }

    let p_star = Kernel::new(SymMat::symmetrize(&p));
    let residual = dare_residual(prob, &p_star)?;
    let bound = 1e-9 * prob.q().frob_norm().max(1.0);
    if !(residual <= bound) {
        return Err(LqrError::NotConverged(format!(
            "fixed point residual {residual:e} exceeds {bound:e}"
        )));
    }
    if !is_stabilizing_kernel(prob, &p_star) {
        return Err(LqrError::NotConverged(
            "fixed point is not stabilizing; the pair may not be stabilizable".into(),
        ));
    }
    let k_star = Gain::new(oracle_gain(a, b, r, &p)?);
    Ok(CertifiedSolution {
        p_star,
        k_star,
        residual,
        iterations_used: iterations,
    })
}

/// Stabilizing solution of the scalar DARE
/// `p = q + a^2 p - a^2 b^2 p^2 / (r + b^2 p)`.
///
/// Clearing the denominator gives `b^2 p^2 + (r - q b^2 - a^2 r) p - q r = 0`;
/// the nonnegative root is returned. With `b = 0` this is the Lyapunov cost
/// `q / (1 - a^2)`.
pub fn scalar_dare_closed_form(a: f64, b: f64, q: f64, r: f64) -> Result<f64> {
    if !(r > 0.0) || !(q >= 0.0) {
        return Err(LqrError::InvalidParameter(format!(
            "need r > 0 and q >= 0, got q={q}, r={r}"
        )));
    }
    if b == 0.0 {
        if a.abs() >= 1.0 {
            return Err(LqrError::NotConverged(format!(
                "(a={a}, b=0) is not stabilizable"
            )));
        }
        return Ok(q / (1.0 - a * a));
    }
    let b2 = b * b;
    let lin = r - q * b2 - a * a * r;
    let disc = (lin * lin + 4.0 * b2 * q * r).sqrt();
    // pick the cancellation-free form of the positive root
    if lin > 0.0 {
        Ok(2.0 * q * r / (lin + disc))
    } else {
        Ok((disc - lin) / (2.0 * b2))
    }
}
