//! LQR problem data and the elementary operators built on it: policy
//! evaluation and improvement, the Riccati/Bellman operator, the closed-loop
//! map, and DARE residuals.
//!
//! Gains follow the `u = K x` convention. Policy improvement therefore
//! returns `K = -L(P)` with `L(P) = (R + B^T P B)^{-1} B^T P A`, and the
//! closed loop is `A + B K = A - B L(P)`.

use std::ops::Deref;

use crate::error::{LqrError, Result};
use crate::matlin::{dlyap, min_eig, schur_stability, solve_linear, Mat, Stability, SymMat};
use crate::tolerances::Tolerances;

/// Dynamics `x_{t+1} = A x_t + B u_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Plant {
    a: Mat,
    b: Mat,
}

impl Plant {
    pub fn new(a: Mat, b: Mat) -> Result<Self> {
        if !a.is_square() || a.rows() != b.rows() {
            return Err(LqrError::DimensionMismatch(format!(
                "A is {}x{}, B is {}x{}",
                a.rows(),
                a.cols(),
                b.rows(),
                b.cols()
            )));
        }
        Ok(Plant { a, b })
    }

    pub fn a(&self) -> &Mat {
        &self.a
    }

    pub fn b(&self) -> &Mat {
        &self.b
    }

    pub fn n_states(&self) -> usize {
        self.a.rows()
    }

    pub fn n_inputs(&self) -> usize {
        self.b.cols()
    }
}

/// Stage cost `x^T Q x + u^T R u` with `R > 0`, `Q >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostWeights {
    q: SymMat,
    r: SymMat,
}

impl CostWeights {
    pub fn new(q: SymMat, r: SymMat) -> Result<Self> {
        let tol = Tolerances::DEFAULT;
        let rmin = min_eig(&r)?;
        if !(rmin > tol.pd_min_eig) {
            return Err(LqrError::InvalidParameter(format!(
                "R must be positive definite (min eigenvalue {rmin:e})"
            )));
        }
        let qmin = min_eig(&q)?;
        if !(qmin > -tol.psd_slack) {
            return Err(LqrError::InvalidParameter(format!(
                "Q must be positive semidefinite (min eigenvalue {qmin:e})"
            )));
        }
        Ok(CostWeights { q, r })
    }

    pub fn q(&self) -> &SymMat {
        &self.q
    }

    pub fn r(&self) -> &SymMat {
        &self.r
    }
}

/// Symmetric cost kernel `P`, so that a cost-to-go reads `x^T P x`.
/// Positive semidefiniteness is not required.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel(SymMat);

impl Kernel {
    pub fn new(p: SymMat) -> Self {
        Kernel(p)
    }

    pub fn zeros(n: usize) -> Self {
        Kernel(SymMat::zeros(n))
    }

    pub fn sym(&self) -> &SymMat {
        &self.0
    }

    pub fn into_sym(self) -> SymMat {
        self.0
    }

    pub fn scale(&self, c: f64) -> Kernel {
        Kernel(self.0.scale(c))
    }

    pub fn is_psd(&self) -> bool {
        min_eig(&self.0).is_ok_and(|l| l > -Tolerances::DEFAULT.psd_slack)
    }
}

impl Deref for Kernel {
    type Target = SymMat;
    fn deref(&self) -> &SymMat {
        &self.0
    }
}

impl From<SymMat> for Kernel {
    fn from(p: SymMat) -> Self {
        Kernel(p)
    }
}

/// Feedback gain `K` (m x n), `u = K x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gain(Mat);

impl Gain {
    pub fn new(k: Mat) -> Self {
        Gain(k)
    }

    pub fn zeros(m: usize, n: usize) -> Self {
        Gain(Mat::zeros(m, n))
    }

    pub fn mat(&self) -> &Mat {
        &self.0
    }
}

impl Deref for Gain {
    type Target = Mat;
    fn deref(&self) -> &Mat {
        &self.0
    }
}

/// The tuple `(A, B, Q, R)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LqrProblem {
    plant: Plant,
    weights: CostWeights,
}

impl LqrProblem {
    pub fn new(plant: Plant, weights: CostWeights) -> Result<Self> {
        let (n, m) = (plant.n_states(), plant.n_inputs());
        if weights.q.dim() != n || weights.r.dim() != m {
            return Err(LqrError::DimensionMismatch(format!(
                "plant has n={n}, m={m}; Q is {0}x{0}, R is {1}x{1}",
                weights.q.dim(),
                weights.r.dim()
            )));
        }
        Ok(LqrProblem { plant, weights })
    }

    /// Convenience constructor from raw matrices.
    pub fn from_mats(a: Mat, b: Mat, q: Mat, r: Mat) -> Result<Self> {
        Self::new(
            Plant::new(a, b)?,
            CostWeights::new(SymMat::new(q)?, SymMat::new(r)?)?,
        )
    }

    /// Scalar problem `(a, b, q, r)`.
    pub fn scalar(a: f64, b: f64, q: f64, r: f64) -> Result<Self> {
        Self::from_mats(Mat::scalar(a), Mat::scalar(b), Mat::scalar(q), Mat::scalar(r))
    }

    /// Same weights, different dynamics. Used for model estimates.
    pub fn with_plant(&self, plant: Plant) -> Result<Self> {
        Self::new(plant, self.weights.clone())
    }

    pub fn plant(&self) -> &Plant {
        &self.plant
    }

    pub fn weights(&self) -> &CostWeights {
        &self.weights
    }

    pub fn a(&self) -> &Mat {
        &self.plant.a
    }

    pub fn b(&self) -> &Mat {
        &self.plant.b
    }

    pub fn q(&self) -> &SymMat {
        &self.weights.q
    }

    pub fn r(&self) -> &SymMat {
        &self.weights.r
    }

    pub fn n_states(&self) -> usize {
        self.plant.n_states()
    }

    pub fn n_inputs(&self) -> usize {
        self.plant.n_inputs()
    }

    fn check_kernel(&self, p: &Kernel) -> Result<()> {
        if p.dim() != self.n_states() {
            return Err(LqrError::DimensionMismatch(format!(
                "kernel is {0}x{0}, problem has n={1}",
                p.dim(),
                self.n_states()
            )));
        }
        Ok(())
    }

    fn check_gain(&self, k: &Gain) -> Result<()> {
        if k.shape() != (self.n_inputs(), self.n_states()) {
            return Err(LqrError::DimensionMismatch(format!(
                "gain is {}x{}, expected {}x{}",
                k.rows(),
                k.cols(),
                self.n_inputs(),
                self.n_states()
            )));
        }
        Ok(())
    }
}

/// `L(P) = (R + B^T P B)^{-1} B^T P A`.
pub fn gain_l(prob: &LqrProblem, p: &Kernel) -> Result<Mat> {
    prob.check_kernel(p)?;
    let b = prob.b();
    let pb = p.matmul(b);
    let s = prob.r().as_mat() + &b.tr_mul(&pb);
    let rhs = pb.tr_mul(prob.a());
    solve_linear(&s, &rhs)
}

/// `A(P) = A - B L(P)`.
pub fn closed_loop(prob: &LqrProblem, p: &Kernel) -> Result<Mat> {
    let l = gain_l(prob, p)?;
    Ok(prob.a() - &prob.b().matmul(&l))
}

/// Closed loop of a gain, `A + B K`.
pub fn gain_closed_loop(prob: &LqrProblem, k: &Gain) -> Result<Mat> {
    prob.check_gain(k)?;
    Ok(prob.a() + &prob.b().matmul(k))
}

/// Stability of the kernel in the sense of the improved gain it induces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelStability {
    Stabilizing,
    NotStabilizing,
    /// The induced closed loop has an eigenvalue product at one.
    Marginal,
    /// `R + B^T P B` could not be inverted.
    Singular,
}

impl KernelStability {
    pub fn is_stabilizing(self) -> bool {
        self == KernelStability::Stabilizing
    }
}

pub fn kernel_stability(prob: &LqrProblem, p: &Kernel) -> KernelStability {
    match closed_loop(prob, p) {
        Err(_) => KernelStability::Singular,
        Ok(acl) => match schur_stability(&acl) {
            Stability::Stable => KernelStability::Stabilizing,
            Stability::Unstable => KernelStability::NotStabilizing,
            Stability::Marginal => KernelStability::Marginal,
        },
    }
}

/// True iff the improved gain `-L(P)` makes the closed loop Schur stable.
pub fn is_stabilizing_kernel(prob: &LqrProblem, p: &Kernel) -> bool {
    kernel_stability(prob, p).is_stabilizing()
}

pub fn is_stabilizing_gain(prob: &LqrProblem, k: &Gain) -> bool {
    gain_closed_loop(prob, k).is_ok_and(|acl| schur_stability(&acl).is_stable())
}

/// Cost kernel of a fixed gain: the solution of
/// `P = Q + K^T R K + (A + B K)^T P (A + B K)`.
pub fn policy_evaluation(prob: &LqrProblem, k: &Gain) -> Result<Kernel> {
    let acl = gain_closed_loop(prob, k)?;
    if !schur_stability(&acl).is_stable() {
        return Err(LqrError::UnstablePolicy);
    }
    let w = prob.q().add(&prob.r().congruence(k));
    Ok(Kernel(dlyap(&acl, &w)?))
}

/// `K = -(R + B^T P B)^{-1} B^T P A`.
pub fn policy_improvement(prob: &LqrProblem, p: &Kernel) -> Result<Gain> {
    Ok(Gain(gain_l(prob, p)?.scale(-1.0)))
}

/// `T(P) = A(P)^T P A(P) + L(P)^T R L(P) + Q`, the value iteration map.
pub fn bellman_operator(prob: &LqrProblem, p: &Kernel) -> Result<Kernel> {
    let l = gain_l(prob, p)?;
    let acl = prob.a() - &prob.b().matmul(&l);
    let t = p
        .congruence(&acl)
        .add(&prob.r().congruence(&l))
        .add(prob.q());
    Ok(Kernel(t))
}

/// The textbook Riccati update `Q + A^T P A - A^T P B (R + B^T P B)^{-1} B^T P A`.
/// Algebraically equal to [`bellman_operator`].
pub fn riccati_update(prob: &LqrProblem, p: &Kernel) -> Result<Kernel> {
    let (a, b) = (prob.a(), prob.b());
    let pa = p.matmul(a);
    let pb = p.matmul(b);
    let s = prob.r().as_mat() + &b.tr_mul(&pb);
    let bpa = pb.tr_mul(a);
    let x = solve_linear(&s, &bpa)?;
    let t = &(prob.q().as_mat() + &a.tr_mul(&pa)) - &bpa.tr_mul(&x);
    Ok(Kernel(SymMat::symmetrize(&t)))
}

/// `||T(P) - P||_F`; zero exactly at solutions of the DARE.
pub fn dare_residual(prob: &LqrProblem, p: &Kernel) -> Result<f64> {
    let t = bellman_operator(prob, p)?;
    Ok((t.as_mat() - p.as_mat()).frob_norm())
}

/// Operational stabilizability check: value iteration from a large multiple
/// of the identity must settle within `max_iter` steps on a stabilizing
/// kernel. Failure flags the pair as likely non-stabilizable.
pub fn likely_stabilizable(prob: &LqrProblem, max_iter: usize) -> bool {
    let n = prob.n_states();
    let mut p = Kernel(SymMat::identity(n).scale(1e3));
    for _ in 0..max_iter {
        let next = match bellman_operator(prob, &p) {
            Ok(k) => k,
            Err(_) => return false,
        };
        if !next.is_finite() {
            return false;
        }
        let step = (next.as_mat() - p.as_mat()).frob_norm();
        p = next;
        if step <= 1e-10 * p.frob_norm().max(1.0) {
            return is_stabilizing_kernel(prob, &p);
        }
    }
    false
}
