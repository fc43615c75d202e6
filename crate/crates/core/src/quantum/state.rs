use nalgebra::SymmetricEigen;

use super::{
    apply_local, hermiticity_defect, CMatrix, CVector, C64, EIGEN_TOL, STATE_TOL,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum StateData {
    Pure(CVector),
    Mixed(CMatrix),
}

/// A pure or mixed state on a tensor product of local spaces.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    dims: Vec<usize>,
    data: StateData,
}

impl QuantumState {
    pub fn pure(dims: Vec<usize>, amplitudes: CVector) -> Result<Self> {
        let total = checked_total(&dims)?;
        if amplitudes.len() != total {
            return Err(Error::Dimension(format!(
                "{} amplitudes for total dimension {total}",
                amplitudes.len()
            )));
        }
        let norm = amplitudes.norm_squared();
        if (norm - 1.0).abs() > STATE_TOL {
            return Err(Error::InvalidState(format!("squared norm {norm} is not 1")));
        }
        Ok(QuantumState { dims, data: StateData::Pure(amplitudes) })
    }

    pub fn mixed(dims: Vec<usize>, rho: CMatrix) -> Result<Self> {
        let total = checked_total(&dims)?;
        if rho.nrows() != total || rho.ncols() != total {
            return Err(Error::Dimension(format!(
                "{}x{} density matrix for total dimension {total}",
                rho.nrows(),
                rho.ncols()
            )));
        }
        let defect = hermiticity_defect(&rho);
        if defect > STATE_TOL {
            return Err(Error::InvalidState(format!("not Hermitian (defect {defect:.3e})")));
        }
        let tr = rho.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > STATE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} is not 1")));
        }
        let min_eig = SymmetricEigen::new(rho.clone()).eigenvalues.min();
        if min_eig < -EIGEN_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min_eig:.3e}")));
        }
        Ok(QuantumState { dims, data: StateData::Mixed(rho) })
    }

    /// `sum_i |i...i> / sqrt(d)` on `n` parties of local dimension `d`.
    pub fn ghz(n: usize, d: usize) -> Result<Self> {
        if n < 1 || d < 1 {
            return Err(Error::Domain(format!("GHZ state needs n >= 1, d >= 1 (got {n}, {d})")));
        }
        let dims = vec![d; n];
        let total = checked_total(&dims)?;
        // index of |i...i> is i * (1 + d + d^2 + ...)
        let step: usize = (0..n).map(|k| d.pow(k as u32)).sum();
        let amp = C64::new(1.0 / (d as f64).sqrt(), 0.0);
        let mut v = CVector::zeros(total);
        for i in 0..d {
            v[i * step] = amp;
        }
        QuantumState::pure(dims, v)
    }

    /// `sum_i |ii> / sqrt(d)` in the computational basis.
    pub fn maximally_entangled(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::Domain(format!("maximally entangled state needs d >= 2, got {d}")));
        }
        QuantumState::ghz(2, d)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn n_parties(&self) -> usize {
        self.dims.len()
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_pure(&self) -> bool {
        matches!(self.data, StateData::Pure(_))
    }

    pub fn amplitudes(&self) -> Option<&CVector> {
        match &self.data {
            StateData::Pure(v) => Some(v),
            StateData::Mixed(_) => None,
        }
    }

    pub fn density_matrix(&self) -> CMatrix {
        match &self.data {
            StateData::Pure(v) => v * v.adjoint(),
            StateData::Mixed(rho) => rho.clone(),
        }
    }

    /// `Re Tr((op_0 ⊗ op_1 ⊗ ...) rho)`; `None` entries stand for the identity.
    pub(crate) fn local_expectation(&self, ops: &[Option<&CMatrix>]) -> f64 {
        let apply_all = |v: &CVector| {
            ops.iter().enumerate().fold(v.clone(), |acc, (party, op)| match op {
                Some(op) => apply_local(op, party, &self.dims, &acc),
                None => acc,
            })
        };
        match &self.data {
            StateData::Pure(psi) => psi.dotc(&apply_all(psi)).re,
            StateData::Mixed(rho) => (0..rho.ncols())
                .map(|j| apply_all(&rho.column(j).into_owned())[j].re)
                .sum(),
        }
    }

    /// Reduced density matrix of a single party.
    pub fn reduced_state(&self, party: usize) -> Result<CMatrix> {
        if party >= self.dims.len() {
            return Err(Error::IndexOutOfRange(format!("party {party}")));
        }
        let d = self.dims[party];
        let stride: usize = self.dims[party + 1..].iter().product();
        let rho = self.density_matrix();
        let total = rho.nrows();
        let mut out = CMatrix::zeros(d, d);
        for i in 0..total {
            let di = (i / stride) % d;
            let rest_i = i - di * stride;
            for j in 0..total {
                let dj = (j / stride) % d;
                if rest_i == j - dj * stride {
                    out[(di, dj)] += rho[(i, j)];
                }
            }
        }
        Ok(out)
    }

    /// `<psi| rho |psi>` for a pure `psi` with the same local dimensions.
    pub fn fidelity_with_pure(&self, psi: &QuantumState) -> Result<f64> {
        let v = psi
            .amplitudes()
            .ok_or_else(|| Error::InvalidState("fidelity reference must be pure".into()))?;
        if psi.dims != self.dims {
            return Err(Error::Dimension(format!("dims {:?} vs {:?}", self.dims, psi.dims)));
        }
        Ok(match &self.data {
            StateData::Pure(w) => v.dotc(w).norm_sqr(),
            StateData::Mixed(rho) => v.dotc(&(rho * v)).re,
        })
    }

    /// Schmidt coefficients of a bipartite pure state, largest first.
    pub fn schmidt_coefficients(&self) -> Result<Vec<f64>> {
        let v = match (&self.data, self.dims.len()) {
            (StateData::Pure(v), 2) => v,
            _ => {
                return Err(Error::InvalidState(
                    "Schmidt decomposition needs a bipartite pure state".into(),
                ))
            }
        };
        let (da, db) = (self.dims[0], self.dims[1]);
        let m = CMatrix::from_fn(da, db, |i, j| v[i * db + j]);
        let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        Ok(s)
    }
}

fn checked_total(dims: &[usize]) -> Result<usize> {
    if dims.is_empty() || dims.contains(&0) {
        return Err(Error::Dimension(format!("invalid local dimensions {dims:?}")));
    }
    Ok(dims.iter().product())
}
