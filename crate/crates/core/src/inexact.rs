//! Value and policy iteration driven by a sequence of model estimates
//! `(A_i, B_i) = (A + s_i D_A, B + s_i D_B)`.

use std::borrow::Cow;

use rand::Rng;

use crate::error::{LqrError, Result};
use crate::lqr::{
    bellman_operator, policy_evaluation, policy_improvement, Kernel, LqrProblem, Plant,
};
use crate::matlin::Mat;
use crate::sampling::gaussian_mat;
use crate::solvers::{drive_pi, drive_vi, IterationTrace, PiInit, Reference, StopRule};

/// Offset scale `s_i` as a function of the iteration index.
#[derive(Debug, Clone, PartialEq)]
pub enum Schedule {
    Exact,
    /// `s_i = rho`
    ConstantOffset { rho: f64 },
    /// `s_i = rho * gamma^i`
    GeometricVanishing { rho: f64, gamma: f64 },
    /// `s_i = rho * (gamma^i + phi)`
    GeometricPlusFloor { rho: f64, gamma: f64, phi: f64 },
    /// `s_i = values[i]`, holding the last value past the end of the list.
    Custom(Vec<f64>),
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(LqrError::InvalidParameter(msg));
        let check_rho = |rho: f64| {
            if rho >= 0.0 && rho.is_finite() {
                Ok(())
            } else {
                bad(format!("rho must be finite and >= 0, got {rho}"))
            }
        };
        let check_gamma = |gamma: f64| {
            if gamma > 0.0 && gamma < 1.0 {
                Ok(())
            } else {
                bad(format!("gamma must lie in (0, 1), got {gamma}"))
            }
        };
        match *self {
            Schedule::Exact => Ok(()),
            Schedule::ConstantOffset { rho } => check_rho(rho),
            Schedule::GeometricVanishing { rho, gamma } => {
                check_rho(rho)?;
                check_gamma(gamma)
            }
            Schedule::GeometricPlusFloor { rho, gamma, phi } => {
                check_rho(rho)?;
                check_gamma(gamma)?;
                if phi >= 0.0 && phi.is_finite() {
                    Ok(())
                } else {
                    bad(format!("phi must be finite and >= 0, got {phi}"))
                }
            }
            Schedule::Custom(ref values) => {
                if values.is_empty() {
                    return bad("custom schedule is empty".into());
                }
                match values.iter().find(|v| !v.is_finite()) {
                    Some(v) => bad(format!("custom schedule has non-finite value {v}")),
                    None => Ok(()),
                }
            }
        }
    }

    pub fn scale(&self, i: usize) -> f64 {
        let pow = |gamma: f64| gamma.powi(i.min(i32::MAX as usize) as i32);
        match *self {
            Schedule::Exact => 0.0,
            Schedule::ConstantOffset { rho } => rho,
            Schedule::GeometricVanishing { rho, gamma } => rho * pow(gamma),
            Schedule::GeometricPlusFloor { rho, gamma, phi } => rho * (pow(gamma) + phi),
            Schedule::Custom(ref values) => values[i.min(values.len() - 1)],
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Schedule::Exact => "exact",
            Schedule::ConstantOffset { .. } => "constant-offset",
            Schedule::GeometricVanishing { .. } => "geometric-vanishing",
            Schedule::GeometricPlusFloor { .. } => "geometric-plus-floor",
            Schedule::Custom(_) => "custom-list",
        }
    }
}

/// Deterministic generator of model estimates around a fixed plant.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateSequence {
    schedule: Schedule,
    d_a: Mat,
    d_b: Mat,
}

impl EstimateSequence {
    pub fn new(schedule: Schedule, d_a: Mat, d_b: Mat) -> Result<Self> {
        schedule.validate()?;
        if !d_a.is_square() || d_b.rows() != d_a.rows() {
            return Err(LqrError::DimensionMismatch(format!(
                "directions D_A {:?} and D_B {:?}",
                d_a.shape(),
                d_b.shape()
            )));
        }
        Ok(EstimateSequence { schedule, d_a, d_b })
    }

    /// Unit-Frobenius Gaussian directions.
    pub fn random_directions<R: Rng>(
        schedule: Schedule,
        plant: &Plant,
        rng: &mut R,
    ) -> Result<Self> {
        let (n, m) = (plant.n_states(), plant.n_inputs());
        let d_a = gaussian_mat(rng, n, n);
        let d_b = gaussian_mat(rng, n, m);
        let d_a = d_a.scale(1.0 / d_a.frob_norm());
        let d_b = d_b.scale(1.0 / d_b.frob_norm());
        Self::new(schedule, d_a, d_b)
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn d_a(&self) -> &Mat {
        &self.d_a
    }

    pub fn d_b(&self) -> &Mat {
        &self.d_b
    }

    pub fn scale(&self, i: usize) -> f64 {
        self.schedule.scale(i)
    }

    /// `(a_i, b_i) = (||A_i - A||_F, ||B_i - B||_F)`.
    pub fn offsets(&self, i: usize) -> (f64, f64) {
        let s = self.scale(i).abs();
        (s * self.d_a.frob_norm(), s * self.d_b.frob_norm())
    }

    pub fn perturbations(&self, i: usize) -> (Mat, Mat) {
        let s = self.scale(i);
        (self.d_a.scale(s), self.d_b.scale(s))
    }

    /// The problem with `(A_i, B_i)` in place of the true plant.
    pub fn estimate<'a>(&self, prob: &'a LqrProblem, i: usize) -> Result<Cow<'a, LqrProblem>> {
        if matches!(self.schedule, Schedule::Exact) {
            return Ok(Cow::Borrowed(prob));
        }
        perturbed(prob, &self.d_a.scale(self.scale(i)), &self.d_b.scale(self.scale(i)))
            .map(Cow::Owned)
    }

    fn check_plant(&self, prob: &LqrProblem) -> Result<()> {
        if self.d_a.rows() != prob.n_states() || self.d_b.cols() != prob.n_inputs() {
            return Err(LqrError::DimensionMismatch(format!(
                "directions {:?}/{:?} for a plant with n={}, m={}",
                self.d_a.shape(),
                self.d_b.shape(),
                prob.n_states(),
                prob.n_inputs()
            )));
        }
        Ok(())
    }
}

/// Schedule with identity-shaped directions `D_A = I_n`, `D_B = I_{n x m}`.
pub fn make_schedule(schedule: Schedule, plant: &Plant) -> Result<EstimateSequence> {
    let (n, m) = (plant.n_states(), plant.n_inputs());
    EstimateSequence::new(schedule, Mat::identity(n), Mat::eye(n, m))
}

fn perturbed(prob: &LqrProblem, da: &Mat, db: &Mat) -> Result<LqrProblem> {
    if da.shape() != prob.a().shape() || db.shape() != prob.b().shape() {
        return Err(LqrError::DimensionMismatch(format!(
            "perturbations {:?}/{:?} for A {:?}, B {:?}",
            da.shape(),
            db.shape(),
            prob.a().shape(),
            prob.b().shape()
        )));
    }
    let plant = Plant::new(prob.a() + da, prob.b() + db)?;
    prob.with_plant(plant)
}

/// A trace together with the perturbation sizes and one-step discrepancies,
/// all indexed like `trace.records`.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustTrace {
    pub trace: IterationTrace,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    /// `||T_hat(P_i) - T(P_i)||_F` for the update leaving record `i`; `None`
    /// where either step is ill-posed.
    pub discrepancy: Vec<Option<f64>>,
}

/// Inexact value iteration: `P_{i+1} = T_i(P_i)` with `T_i` built from
/// `(A_i, B_i)`. Every record carries its stability flag for the true plant.
pub fn inexact_vi_run(
    prob: &LqrProblem,
    p0: Kernel,
    seq: &EstimateSequence,
    stop: StopRule,
    reference: Option<&Reference>,
) -> Result<RobustTrace> {
    seq.check_plant(prob)?;
    let trace = drive_vi(prob, p0, stop, reference, &|i| seq.estimate(prob, i));
    let (a, b) = (0..trace.len()).map(|i| seq.offsets(i)).unzip();
    let discrepancy = trace
        .records
        .iter()
        .map(|r| {
            let (da, db) = seq.perturbations(r.index);
            one_step_discrepancy_vi(prob, &r.kernel, &da, &db).ok()
        })
        .collect();
    Ok(RobustTrace {
        trace,
        a,
        b,
        discrepancy,
    })
}

/// Inexact policy iteration. The step `P_i -> P_{i+1}` improves and
/// evaluates with `(A_{i+1}, B_{i+1})`; a gain initialization is evaluated
/// with `(A_0, B_0)`.
pub fn inexact_pi_run(
    prob: &LqrProblem,
    init: PiInit,
    seq: &EstimateSequence,
    stop: StopRule,
    reference: Option<&Reference>,
) -> Result<RobustTrace> {
    seq.check_plant(prob)?;
    let trace = drive_pi(prob, init, stop, reference, &|i| seq.estimate(prob, i));
    let (a, b) = (0..trace.len()).map(|i| seq.offsets(i)).unzip();
    let discrepancy = trace
        .records
        .iter()
        .map(|r| {
            let (da, db) = seq.perturbations(r.index + 1);
            one_step_discrepancy_pi(prob, &r.kernel, &da, &db).ok()
        })
        .collect();
    Ok(RobustTrace {
        trace,
        a,
        b,
        discrepancy,
    })
}

/// `||T_hat(P) - T(P)||_F` where `T_hat` uses `(A + da, B + db)`.
pub fn one_step_discrepancy_vi(prob: &LqrProblem, p: &Kernel, da: &Mat, db: &Mat) -> Result<f64> {
    let est = perturbed(prob, da, db)?;
    let exact = bellman_operator(prob, p)?;
    let inexact = bellman_operator(&est, p)?;
    Ok((inexact.as_mat() - exact.as_mat()).frob_norm())
}

fn pi_step(prob: &LqrProblem, p: &Kernel) -> Result<Kernel> {
    policy_evaluation(prob, &policy_improvement(prob, p)?)
}

/// Difference between one policy iteration step from `P` on the perturbed
/// and on the true model.
pub fn one_step_discrepancy_pi(prob: &LqrProblem, p: &Kernel, da: &Mat, db: &Mat) -> Result<f64> {
    let est = perturbed(prob, da, db)?;
    let exact = pi_step(prob, p)?;
    let inexact = pi_step(&est, p)?;
    Ok((inexact.as_mat() - exact.as_mat()).frob_norm())
}
