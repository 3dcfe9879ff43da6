//! Instruments for the convergence and robustness theory: the `P_eps`
//! weight, contraction factor estimates, empirical probes of the
//! stabilizing ball (delta_0) and the one-step PI contraction ball
//! (delta_1), the quadratic-rate constants of policy iteration, and ISS gain
//! fits.

use rand::Rng;

use crate::error::{LqrError, Result};
use crate::inexact::{inexact_pi_run, inexact_vi_run, make_schedule, Schedule};
use crate::lqr::{
    closed_loop, dare_residual, is_stabilizing_kernel, policy_evaluation, policy_improvement,
    Kernel, LqrProblem,
};
use crate::matlin::{dlyap, inverse, max_eig, min_eig, peps_norm, pmat, SymMat};
use crate::sampling::{unit_psd, unit_symmetric};
use crate::solvers::{usable_errors, IterationTrace, PiInit, Reference, StopRule};
use crate::tolerances::Tolerances;

/// Weight `0 < P_eps <= I` under which the optimal closed loop contracts.
#[derive(Debug, Clone, PartialEq)]
pub struct PepsWeight {
    pub peps: SymMat,
    /// `||A(P*)||_{P_eps}`, always below one.
    pub contraction_at_optimum: f64,
}

/// Builds `P_eps = M / lambda_max(M)` from `A(P*)^T M A(P*) - M = -I`.
///
/// Then `A(P*)^T P_eps A(P*) = P_eps - I / lambda_max(M)`, so
/// `||A(P*)||_{P_eps}^2 = 1 - 1/lambda_max(M) < 1` and `P_eps <= I`.
pub fn construct_peps(prob: &LqrProblem, p_star: &Kernel) -> Result<PepsWeight> {
    let residual = dare_residual(prob, p_star)?;
    if !(residual <= 1e-6) {
        return Err(LqrError::InvalidOptimum(format!("DARE residual {residual:e}")));
    }
    let acl = closed_loop(prob, p_star)?;
    let m = dlyap(&acl, &SymMat::identity(prob.n_states()))
        .map_err(|_| LqrError::InvalidOptimum("optimal closed loop is not Schur stable".into()))?;
    if !(min_eig(&m)? > Tolerances::DEFAULT.pd_min_eig) {
        return Err(LqrError::InvalidOptimum(
            "optimal closed loop is not Schur stable".into(),
        ));
    }
    let peps = m.scale(1.0 / max_eig(&m)?);
    let contraction_at_optimum = peps_norm(&acl, &peps)?;
    Ok(PepsWeight {
        peps,
        contraction_at_optimum,
    })
}

/// Norm in which iteration errors are measured.
#[derive(Debug, Clone, Copy)]
pub enum ErrorNorm<'a> {
    Frobenius,
    Peps(&'a SymMat),
}

impl ErrorNorm<'_> {
    pub fn of(&self, m: &crate::matlin::Mat) -> Result<f64> {
        match self {
            ErrorNorm::Frobenius => Ok(m.frob_norm()),
            ErrorNorm::Peps(w) => peps_norm(m, w),
        }
    }
}

/// Largest realized ratio `e_{i+1} / e_i` along a trace, the tightest
/// contraction constant consistent with it. Errors below 1e-14 end the
/// series.
pub fn estimate_contraction(
    trace: &IterationTrace,
    reference: &Kernel,
    norm: ErrorNorm<'_>,
) -> Result<f64> {
    let errors = trace
        .records
        .iter()
        .map(|r| norm.of(&(r.kernel.as_mat() - reference.as_mat())))
        .collect::<Result<Vec<_>>>()?;
    let e = usable_errors(&errors);
    if e.len() < 3 {
        return Err(LqrError::Degenerate(format!(
            "contraction estimate needs 3 nonzero errors, trace has {}",
            e.len()
        )));
    }
    Ok(e.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max))
}

/// `sup_i ||A(P_i)||_{P_eps}^2` over the kernels of a trace.
pub fn trajectory_alpha(prob: &LqrProblem, trace: &IterationTrace, peps: &SymMat) -> Result<f64> {
    let mut alpha = 0.0f64;
    for r in &trace.records {
        let n = peps_norm(&closed_loop(prob, &r.kernel)?, peps)?;
        alpha = alpha.max(n * n);
    }
    Ok(alpha)
}

/// Sampled inner estimate of a ball radius around `P*`.
#[derive(Debug, Clone, PartialEq)]
pub struct BallEstimate {
    pub radius: f64,
    pub directions_tested: usize,
    /// Unit direction that produced the smallest radius, when a failing
    /// sample (rather than the cap) bounded it.
    pub failure_direction: Option<SymMat>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirectionKind {
    Symmetric,
    Psd,
}

const GRID_POINTS: usize = 16;
const BISECTION_STEPS: usize = 20;

/// Largest `t` in `(0, cap]` with `holds(t)`, assuming the property holds
/// near zero: a coarse grid locates the first failure, bisection refines it.
/// `None` means the cap was reached.
fn first_failure(cap: f64, holds: &dyn Fn(f64) -> bool) -> Option<f64> {
    let mut lo = 0.0;
    let mut hi = None;
    for k in 1..=GRID_POINTS {
        let t = cap * k as f64 / GRID_POINTS as f64;
        if holds(t) {
            lo = t;
        } else {
            hi = Some(t);
            break;
        }
    }
    let mut hi = hi?;
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if holds(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(lo)
}

fn probe<R: Rng>(
    n: usize,
    n_directions: usize,
    cap: f64,
    kind: DirectionKind,
    rng: &mut R,
    holds: &dyn Fn(&SymMat, f64) -> bool,
) -> BallEstimate {
    let mut est = BallEstimate {
        radius: cap,
        directions_tested: 0,
        failure_direction: None,
    };
    for _ in 0..n_directions {
        let d = match kind {
            DirectionKind::Symmetric => unit_symmetric(rng, n),
            DirectionKind::Psd => unit_psd(rng, n),
        };
        est.directions_tested += 1;
        if let Some(t) = first_failure(cap, &|t| holds(&d, t)) {
            if est.failure_direction.is_none() || t < est.radius {
                est.radius = t;
                est.failure_direction = Some(d);
            }
        }
    }
    est
}

fn shifted(p_star: &Kernel, d: &SymMat, t: f64) -> Kernel {
    Kernel::new(p_star.sym().add(&d.scale(t)))
}

/// Inner estimate of the radius of the stabilizing ball around `P*`: the
/// minimum over random unit directions `D` of the largest `t <= cap` with
/// `P* + t D` stabilizing.
pub fn probe_delta0<R: Rng>(
    prob: &LqrProblem,
    p_star: &Kernel,
    n_directions: usize,
    radius_cap: f64,
    kind: DirectionKind,
    rng: &mut R,
) -> BallEstimate {
    probe(prob.n_states(), n_directions, radius_cap, kind, rng, &|d, t| {
        is_stabilizing_kernel(prob, &shifted(p_star, d, t))
    })
}

/// One policy iteration step (improve, then evaluate) from a kernel.
pub fn pi_step(prob: &LqrProblem, p: &Kernel) -> Result<Kernel> {
    policy_evaluation(prob, &policy_improvement(prob, p)?)
}

fn pi_contracts(prob: &LqrProblem, p_star: &Kernel, p0: &Kernel) -> bool {
    let e0 = (p0.as_mat() - p_star.as_mat()).frob_norm();
    match pi_step(prob, p0) {
        Ok(p1) => (p1.as_mat() - p_star.as_mat()).frob_norm() < e0,
        Err(_) => false,
    }
}

/// Inner estimate of the ball (within `delta0`) in which one policy
/// iteration step strictly reduces the Frobenius distance to `P*`.
pub fn probe_delta1<R: Rng>(
    prob: &LqrProblem,
    p_star: &Kernel,
    delta0: f64,
    n_directions: usize,
    rng: &mut R,
) -> BallEstimate {
    probe(
        prob.n_states(),
        n_directions,
        delta0,
        DirectionKind::Symmetric,
        rng,
        &|d, t| pi_contracts(prob, p_star, &shifted(p_star, d, t)),
    )
}

/// Constants of the local quadratic bound
/// `||P* - P_+||_F <= a0(P*) a1(P) ||P* - P||_F^2` for one policy iteration
/// step `P -> P_+`:
///
/// `a0 = ||R + B^T P* B||_F ||R^-1||_F^2 ||B||_F^2 ||A||_F^2`,
/// `a1 = ||pmat(A(P))^-1||_F (1 + ||R^-1||_F ||B||_F^2 ||P||_F)^2`.
pub fn quadratic_constants(prob: &LqrProblem, p_star: &Kernel, p: &Kernel) -> Result<(f64, f64)> {
    let (a, b) = (prob.a(), prob.b());
    let r = prob.r().as_mat();
    let r_inv = inverse(r)?.frob_norm();
    let b2 = b.frob_norm().powi(2);
    let gram = r + &b.tr_mul(&p_star.as_mat().matmul(b));
    let a0 = gram.frob_norm() * r_inv * r_inv * b2 * a.frob_norm().powi(2);
    let p_inv = inverse(&pmat(&closed_loop(prob, p)?))?.frob_norm();
    let a1 = p_inv * (1.0 + r_inv * b2 * p.frob_norm()).powi(2);
    Ok((a0, a1))
}

/// Least-squares fit `e = c rho` through the origin with the uncentered
/// coefficient of determination `1 - SS_res / sum(e^2)`.
pub fn iss_gain_fit(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    if points.len() < 3 {
        return Err(LqrError::Degenerate(format!(
            "fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(LqrError::Degenerate("rho values must be strictly increasing".into()));
    }
    let sxx: f64 = points.iter().map(|(x, _)| x * x).sum();
    let syy: f64 = points.iter().map(|(_, y)| y * y).sum();
    if !(sxx > 0.0) || !(syy > 0.0) {
        return Err(LqrError::Degenerate("all-zero fit data".into()));
    }
    let sxy: f64 = points.iter().map(|(x, y)| x * y).sum();
    let slope = sxy / sxx;
    let ss_res: f64 = points.iter().map(|(x, y)| (y - slope * x).powi(2)).sum();
    Ok((slope, (1.0 - ss_res / syy).clamp(0.0, 1.0)))
}

pub const ISS_HORIZON: usize = 500;
pub const ISS_TAIL: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Vi,
    Pi,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Vi => "vi",
            Method::Pi => "pi",
        }
    }
}

/// Mean Frobenius error over the last [`ISS_TAIL`] records of a
/// constant-offset run of [`ISS_HORIZON`] iterations from `p0` (policy
/// iteration starts from the kernel `p0`).
pub fn asymptotic_error(
    prob: &LqrProblem,
    reference: &Reference,
    method: Method,
    p0: &Kernel,
    rho: f64,
) -> Result<f64> {
    let seq = make_schedule(Schedule::ConstantOffset { rho }, prob.plant())?;
    let stop = StopRule::new(f64::MIN_POSITIVE, ISS_HORIZON)?;
    let run = match method {
        Method::Vi => inexact_vi_run(prob, p0.clone(), &seq, stop, Some(reference))?,
        Method::Pi => inexact_pi_run(prob, PiInit::Kernel(p0.clone()), &seq, stop, Some(reference))?,
    };
    let mut errors = run.trace.frob_errors().unwrap_or_default();
    if run.trace.converged() {
        // a fixed point was reached: the remaining iterates repeat it
        let last = errors.last().copied().unwrap_or(0.0);
        errors.resize(errors.len().max(ISS_HORIZON + 1), last);
    }
    if errors.len() < ISS_TAIL {
        return Err(LqrError::NotConverged(format!(
            "{} run ended after {} records ({})",
            method.as_str(),
            errors.len(),
            run.trace.termination
        )));
    }
    let tail = &errors[errors.len() - ISS_TAIL..];
    Ok(tail.iter().sum::<f64>() / ISS_TAIL as f64)
}

/// `(rho, asymptotic error)` for each offset scale.
pub fn iss_sweep(
    prob: &LqrProblem,
    reference: &Reference,
    method: Method,
    p0: &Kernel,
    rhos: &[f64],
) -> Result<Vec<(f64, f64)>> {
    rhos.iter()
        .map(|&rho| Ok((rho, asymptotic_error(prob, reference, method, p0, rho)?)))
        .collect()
}
