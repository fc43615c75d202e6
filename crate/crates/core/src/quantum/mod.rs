//! States, POVMs and the quantum predictions of a Bell experiment.
//!
//! Everything here works in double precision. The Schmidt basis of the
//! maximally entangled state is the computational basis, and complex
//! conjugation ([`conjugate_in_schmidt_basis`]) is taken relative to it.

mod povm;
mod scenario;
mod state;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub use povm::{Povm, RankOneElement, RankOnePovm};
pub use scenario::{Scenario, ScenarioJson, StateJson};
pub use state::QuantumState;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Norm, trace and hermiticity tolerance for states.
pub const STATE_TOL: f64 = 1e-12;
/// Most negative eigenvalue accepted for a density matrix.
pub const EIGEN_TOL: f64 = 1e-10;
/// Positivity and completeness tolerance for POVMs.
pub const POVM_TOL: f64 = 1e-10;
/// Eigenvalues at or below this are dropped by rank-one refinement.
pub const RANK_CUTOFF: f64 = 1e-12;

/// Draws a pure state from the unitarily invariant measure on `C^d`.
///
/// Uses `2d` independent standard normals as real and imaginary parts and
/// normalizes; the complex Gaussian vector is invariant under every fixed
/// unitary, so its direction is Haar distributed.
pub fn haar_random_state<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CVector {
    loop {
        let v = CVector::from_fn(d, |_, _| {
            C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        let norm = v.norm();
        if norm > 0.0 {
            return v / C64::from(norm);
        }
    }
}

/// Entrywise complex conjugate in the computational (Schmidt) basis.
pub fn conjugate_in_schmidt_basis(v: &CVector) -> CVector {
    v.conjugate()
}

/// Random density matrix `G G† / Tr(G G†)` from a complex Ginibre matrix.
pub fn random_density_matrix<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    let g = CMatrix::from_fn(dim, dim, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let rho = &g * g.adjoint();
    let tr = rho.trace();
    hermitize(&(rho / tr))
}

pub(crate) fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * C64::from(0.5)
}

/// Largest entrywise deviation `max |m_ij - conj(m_ji)|`.
pub(crate) fn hermiticity_defect(m: &CMatrix) -> f64 {
    (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Applies `op` to the tensor factor `party` of `v`. Party 0 is the most
/// significant factor, matching the Kronecker product ordering.
pub(crate) fn apply_local(op: &CMatrix, party: usize, dims: &[usize], v: &CVector) -> CVector {
    let d = dims[party];
    let stride: usize = dims[party + 1..].iter().product();
    let mut out = CVector::zeros(v.len());
    for (i, slot) in out.iter_mut().enumerate() {
        let digit = (i / stride) % d;
        let base = i - digit * stride;
        let mut acc = C64::new(0.0, 0.0);
        for k in 0..d {
            let coeff = op[(digit, k)];
            if coeff != C64::new(0.0, 0.0) {
                acc += coeff * v[base + k * stride];
            }
        }
        *slot = acc;
    }
    out
}
