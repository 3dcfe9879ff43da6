//! Small dense real linear algebra: exactly the primitives the LQR
//! iterations and their analysis need, sized for n up to about 20.

mod eig;
mod lyap;
mod mat;
mod solve;
mod stability;

pub use eig::{max_eig, min_eig, sym_eig, SymEig};
pub use lyap::{dlyap, lyap_operator, pmat};
pub use mat::{Mat, SymMat};
pub use solve::{inverse, solve_linear};
pub use stability::{
    is_schur_stable, peps_norm, schur_stability, spectral_norm, spectral_radius_estimate,
    SpectralRadiusEstimate, Stability,
};

/// Free-function form of [`Mat::kron`].
pub fn kron(a: &Mat, b: &Mat) -> Mat {
    a.kron(b)
}

/// Free-function form of [`Mat::vec`].
pub fn vec(m: &Mat) -> Mat {
    m.vec()
}

/// Free-function form of [`Mat::frob_norm`].
pub fn frob_norm(m: &Mat) -> f64 {
    m.frob_norm()
}
