//! Exact value iteration and policy iteration, each producing a full
//! [`IterationTrace`].
//!
//! Runs terminate on the step size `||P_{i+1} - P_i||_F`, never on the
//! distance to a reference solution; the reference, when supplied, only
//! fills the error columns of the trace.

use std::borrow::Cow;
use std::fmt;

use crate::analysis::{construct_peps, PepsWeight};
use crate::error::{LqrError, Result};
use crate::lqr::{
    bellman_operator, dare_residual, is_stabilizing_gain, is_stabilizing_kernel,
    policy_evaluation, policy_improvement, Gain, Kernel, LqrProblem,
};
use crate::matlin::{min_eig, peps_norm, SymMat};
use crate::tolerances::Tolerances;

/// Termination test: stop once `||P_{i+1} - P_i||_F <= tol * max(1, ||P_{i+1}||_F)`
/// or after `max_iter` updates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopRule {
    pub tol: f64,
    pub max_iter: usize,
}

impl StopRule {
    pub fn new(tol: f64, max_iter: usize) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(LqrError::InvalidParameter(format!("tol must be positive, got {tol}")));
        }
        if max_iter == 0 {
            return Err(LqrError::InvalidParameter("max_iter must be positive".into()));
        }
        Ok(StopRule { tol, max_iter })
    }

    pub fn with_max_iter(self, max_iter: usize) -> Self {
        StopRule { max_iter, ..self }
    }

    fn satisfied(&self, step: f64, next: &Kernel) -> bool {
        step <= self.tol * next.frob_norm().max(1.0)
    }
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule {
            tol: 1e-12,
            max_iter: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Termination {
    Converged,
    MaxIter,
    UnstablePolicy,
    Singularity,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::MaxIter => "max-iter",
            Termination::UnstablePolicy => "unstable-policy",
            Termination::Singularity => "singularity",
        }
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Optimal kernel used to fill error columns, with its `P_eps` weight when
/// one could be built.
#[derive(Debug, Clone)]
pub struct Reference {
    pub p_star: Kernel,
    pub peps: Option<PepsWeight>,
}

impl Reference {
    pub fn new(prob: &LqrProblem, p_star: Kernel) -> Self {
        let peps = construct_peps(prob, &p_star).ok();
        Reference { p_star, peps }
    }

    pub fn without_peps(p_star: Kernel) -> Self {
        Reference { p_star, peps: None }
    }

    pub fn frob_error(&self, p: &Kernel) -> f64 {
        (p.as_mat() - self.p_star.as_mat()).frob_norm()
    }

    pub fn peps_error(&self, p: &Kernel) -> Option<f64> {
        let w = self.peps.as_ref()?;
        peps_norm(&(p.as_mat() - self.p_star.as_mat()), &w.peps).ok()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub index: usize,
    pub kernel: Kernel,
    /// Gain whose evaluation produced this kernel (policy iteration only).
    pub gain: Option<Gain>,
    /// `||P_i - P_{i-1}||_F`; absent at `i = 0`.
    pub step: Option<f64>,
    /// `||T(P_i) - P_i||_F` on the true problem.
    pub dare_residual: Option<f64>,
    pub frob_error: Option<f64>,
    pub peps_error: Option<f64>,
    /// Whether `P_i` is a stabilizing kernel for the true plant.
    pub stabilizing: bool,
    /// Whether `gain` stabilizes the true plant.
    pub gain_stabilizing: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
    pub termination: Termination,
}

impl IterationTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    pub fn final_kernel(&self) -> Option<&Kernel> {
        self.last().map(|r| &r.kernel)
    }

    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }

    /// Frobenius errors, when a reference was supplied.
    pub fn frob_errors(&self) -> Option<Vec<f64>> {
        self.records.iter().map(|r| r.frob_error).collect()
    }

    pub fn peps_errors(&self) -> Option<Vec<f64>> {
        self.records.iter().map(|r| r.peps_error).collect()
    }
}

/// Initialization of policy iteration: a gain (evaluate first) or a kernel
/// (improve first).
#[derive(Debug, Clone, PartialEq)]
pub enum PiInit {
    Gain(Gain),
    Kernel(Kernel),
}

pub(crate) fn make_record(
    prob: &LqrProblem,
    index: usize,
    kernel: Kernel,
    gain: Option<Gain>,
    step: Option<f64>,
    reference: Option<&Reference>,
) -> IterationRecord {
    let stabilizing = is_stabilizing_kernel(prob, &kernel);
    let gain_stabilizing = gain.as_ref().map(|k| is_stabilizing_gain(prob, k));
    IterationRecord {
        index,
        dare_residual: dare_residual(prob, &kernel).ok(),
        frob_error: reference.map(|r| r.frob_error(&kernel)),
        peps_error: reference.and_then(|r| r.peps_error(&kernel)),
        stabilizing,
        gain_stabilizing,
        kernel,
        gain,
        step,
    }
}

/// Model used at iteration `i`: the true problem for exact runs, an estimate
/// for inexact ones.
pub(crate) type ModelAt<'a> = dyn Fn(usize) -> Result<Cow<'a, LqrProblem>> + 'a;

pub(crate) fn drive_vi(
    prob: &LqrProblem,
    p0: Kernel,
    stop: StopRule,
    reference: Option<&Reference>,
    model_at: &ModelAt<'_>,
) -> IterationTrace {
    let mut records = vec![make_record(prob, 0, p0, None, None, reference)];
    let mut termination = Termination::MaxIter;
    for i in 0..stop.max_iter {
        let p = &records[i].kernel;
        let next = match model_at(i).and_then(|m| bellman_operator(&m, p)) {
            Ok(k) if k.is_finite() => k,
            _ => {
                termination = Termination::Singularity;
                break;
            }
        };
        let step = (next.as_mat() - p.as_mat()).frob_norm();
        let done = stop.satisfied(step, &next);
        records.push(make_record(prob, i + 1, next, None, Some(step), reference));
        if done {
            termination = Termination::Converged;
            break;
        }
    }
    IterationTrace {
        records,
        termination,
    }
}

fn evaluation_failure(e: &LqrError) -> Termination {
    match e {
        LqrError::UnstablePolicy => Termination::UnstablePolicy,
        _ => Termination::Singularity,
    }
}

pub(crate) fn drive_pi(
    prob: &LqrProblem,
    init: PiInit,
    stop: StopRule,
    reference: Option<&Reference>,
    model_at: &ModelAt<'_>,
) -> IterationTrace {
    let first = match init {
        PiInit::Kernel(p0) => make_record(prob, 0, p0, None, None, reference),
        PiInit::Gain(k0) => match model_at(0).and_then(|m| policy_evaluation(&m, &k0)) {
            Ok(p0) => make_record(prob, 0, p0, Some(k0), None, reference),
            Err(e) => {
                return IterationTrace {
                    records: Vec::new(),
                    termination: evaluation_failure(&e),
                }
            }
        },
    };
    let mut records = vec![first];
    let mut termination = Termination::MaxIter;
    for i in 0..stop.max_iter {
        let p = &records[i].kernel;
        let model = match model_at(i + 1) {
            Ok(m) => m,
            Err(_) => {
                termination = Termination::Singularity;
                break;
            }
        };
        let k = match policy_improvement(&model, p) {
            Ok(k) => k,
            Err(_) => {
                termination = Termination::Singularity;
                break;
            }
        };
        let next = match policy_evaluation(&model, &k) {
            Ok(next) => next,
            Err(e) => {
                termination = evaluation_failure(&e);
                break;
            }
        };
        let step = (next.as_mat() - p.as_mat()).frob_norm();
        let done = stop.satisfied(step, &next);
        records.push(make_record(prob, i + 1, next, Some(k), Some(step), reference));
        if done {
            termination = Termination::Converged;
            break;
        }
    }
    IterationTrace {
        records,
        termination,
    }
}

/// One value iteration update, `P <- T(P)`.
pub fn vi_step(prob: &LqrProblem, p: &Kernel) -> Result<Kernel> {
    bellman_operator(prob, p)
}

/// Value iteration from `p0`.
pub fn vi_run(
    prob: &LqrProblem,
    p0: Kernel,
    stop: StopRule,
    reference: Option<&Reference>,
) -> IterationTrace {
    drive_vi(prob, p0, stop, reference, &|_| Ok(Cow::Borrowed(prob)))
}

/// Policy iteration. A gain initialization is evaluated first; a kernel
/// initialization is improved first (`P_0 -> K_1 -> P_1`). A policy that
/// cannot be evaluated ends the trace with [`Termination::UnstablePolicy`].
pub fn pi_run(
    prob: &LqrProblem,
    init: PiInit,
    stop: StopRule,
    reference: Option<&Reference>,
) -> IterationTrace {
    drive_pi(prob, init, stop, reference, &|_| Ok(Cow::Borrowed(prob)))
}

/// `min_i lambda_min(P_i - P_{i+1})`; nonnegative (up to slack) for a
/// monotonically decreasing kernel sequence.
pub fn kernel_decrease_margin(trace: &IterationTrace) -> Option<f64> {
    trace
        .records
        .windows(2)
        .map(|w| {
            let d = SymMat::symmetrize(&(w[0].kernel.as_mat() - w[1].kernel.as_mat()));
            min_eig(&d).unwrap_or(f64::NEG_INFINITY)
        })
        .reduce(f64::min)
}

/// `min_i lambda_min(P_i - P*)`.
pub fn reference_margin(trace: &IterationTrace, p_star: &Kernel) -> Option<f64> {
    trace
        .records
        .iter()
        .map(|r| {
            let d = SymMat::symmetrize(&(r.kernel.as_mat() - p_star.as_mat()));
            min_eig(&d).unwrap_or(f64::NEG_INFINITY)
        })
        .reduce(f64::min)
}

/// True when both ordering margins clear the `-1e-8` slack.
pub fn is_monotone_to(trace: &IterationTrace, p_star: &Kernel) -> bool {
    let slack = -Tolerances::DEFAULT.order_slack;
    kernel_decrease_margin(trace).is_none_or(|m| m >= slack)
        && reference_margin(trace, p_star).is_some_and(|m| m >= slack)
}

/// Prefix of `errors` that stays above the ratio floor.
pub(crate) fn usable_errors(errors: &[f64]) -> &[f64] {
    let floor = Tolerances::DEFAULT.ratio_floor;
    let end = errors.iter().position(|&e| !(e >= floor)).unwrap_or(errors.len());
    &errors[..end]
}

/// Observed rates of a trace: `e_{i+1}/e_i` and `e_{i+1}/e_i^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateCheck {
    pub ratios: Vec<f64>,
    pub quadratic_ratios: Vec<f64>,
}

/// Linear and quadratic error ratios in Frobenius norm. Lists stop before
/// any error falls below 1e-14.
pub fn hewer_rate_check(trace: &IterationTrace, reference: &Kernel) -> Result<RateCheck> {
    if trace.len() < 3 {
        return Err(LqrError::Degenerate(format!(
            "rate check needs at least 3 iterates, trace has {}",
            trace.len()
        )));
    }
    let errors: Vec<f64> = trace
        .records
        .iter()
        .map(|r| (r.kernel.as_mat() - reference.as_mat()).frob_norm())
        .collect();
    let e = usable_errors(&errors);
    let ratios = e.windows(2).map(|w| w[1] / w[0]).collect();
    let quadratic_ratios = e.windows(2).map(|w| w[1] / (w[0] * w[0])).collect();
    Ok(RateCheck {
        ratios,
        quadratic_ratios,
    })
}
