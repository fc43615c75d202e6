use nalgebra::SymmetricEigen;
use rand::Rng;

use super::{hermitize, random_density_matrix, CMatrix, CVector, C64, POVM_TOL, RANK_CUTOFF};
use crate::error::{Error, PovmInvariant, Result};

/// A measurement: positive operators, one per outcome, summing to the identity.
///
/// [`Povm::new`] only checks shapes. Call [`Povm::validate`] (or build a
/// [`Scenario`](super::Scenario), which does) to enforce the invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct Povm {
    elements: Vec<CMatrix>,
}

impl Povm {
    pub fn new(elements: Vec<CMatrix>) -> Result<Self> {
        let first = elements
            .first()
            .ok_or_else(|| Error::Dimension("POVM with no elements".into()))?;
        let d = first.nrows();
        for (i, e) in elements.iter().enumerate() {
            if e.nrows() != e.ncols() {
                return Err(Error::Dimension(format!(
                    "element {i} is {}x{}, not square",
                    e.nrows(),
                    e.ncols()
                )));
            }
            if e.nrows() != d {
                return Err(Error::Dimension(format!(
                    "element {i} has dimension {}, expected {d}",
                    e.nrows()
                )));
            }
        }
        if d == 0 {
            return Err(Error::Dimension("zero-dimensional POVM".into()));
        }
        Ok(Povm { elements })
    }

    /// Projective measurement onto the computational basis of `C^d`.
    pub fn computational(d: usize) -> Self {
        let elements = (0..d)
            .map(|i| {
                let mut m = CMatrix::zeros(d, d);
                m[(i, i)] = C64::new(1.0, 0.0);
                m
            })
            .collect();
        Povm { elements }
    }

    /// Projective measurement onto the given vectors (normalized here).
    pub fn projective(basis: &[CVector]) -> Result<Self> {
        Povm::new(
            basis
                .iter()
                .map(|v| {
                    let u = v / C64::from(v.norm());
                    &u * u.adjoint()
                })
                .collect(),
        )
    }

    /// Real qubit measurement along angle `theta` in the x-z plane:
    /// projectors onto `cos(t/2)|0> + sin(t/2)|1>` and its orthogonal.
    pub fn qubit_angle(theta: f64) -> Self {
        let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
        let v0 = CVector::from_vec(vec![C64::new(c, 0.0), C64::new(s, 0.0)]);
        let v1 = CVector::from_vec(vec![C64::new(-s, 0.0), C64::new(c, 0.0)]);
        Povm::projective(&[v0, v1]).expect("two qubit vectors")
    }

    /// A random POVM with `k` full-rank elements, `S^{-1/2} A_i S^{-1/2}`
    /// with `A_i` Ginibre positives and `S = sum A_i`.
    pub fn random<R: Rng + ?Sized>(d: usize, k: usize, rng: &mut R) -> Self {
        let raw: Vec<CMatrix> = (0..k).map(|_| random_density_matrix(d, rng)).collect();
        let sum = raw.iter().fold(CMatrix::zeros(d, d), |acc, m| acc + m);
        let eig = SymmetricEigen::new(sum);
        let inv_sqrt = CMatrix::from_diagonal(&eig.eigenvalues.map(|l| C64::from(1.0 / l.sqrt())));
        let s = &eig.eigenvectors * inv_sqrt * eig.eigenvectors.adjoint();
        let elements = raw.iter().map(|a| hermitize(&(&s * a * &s))).collect();
        Povm { elements }
    }

    pub fn dim(&self) -> usize {
        self.elements[0].nrows()
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[CMatrix] {
        &self.elements
    }

    pub fn element(&self, outcome: usize) -> Option<&CMatrix> {
        self.elements.get(outcome)
    }

    /// Checks positivity and completeness to within [`POVM_TOL`]. The error
    /// names the failed invariant and its worst-case deviation.
    pub fn validate(&self) -> Result<()> {
        for (i, e) in self.elements.iter().enumerate() {
            let defect = super::hermiticity_defect(e);
            if defect > POVM_TOL {
                return Err(Error::PovmViolation {
                    invariant: PovmInvariant::Positivity,
                    element: i,
                    deviation: defect,
                });
            }
            let min = SymmetricEigen::new(hermitize(e)).eigenvalues.min();
            if min < -POVM_TOL {
                return Err(Error::PovmViolation {
                    invariant: PovmInvariant::Positivity,
                    element: i,
                    deviation: -min,
                });
            }
        }
        let d = self.dim();
        let sum = self.elements.iter().fold(CMatrix::zeros(d, d), |acc, m| acc + m);
        let (worst, deviation) = (sum - CMatrix::identity(d, d))
            .iter()
            .map(|z| z.norm())
            .enumerate()
            .fold((0, 0.0), |best, (i, x)| if x > best.1 { (i, x) } else { best });
        if deviation > POVM_TOL {
            // report the flattened entry index of the worst deviation
            return Err(Error::PovmViolation {
                invariant: PovmInvariant::Completeness,
                element: worst,
                deviation,
            });
        }
        Ok(())
    }

    /// Splits every element into rank-one pieces by eigendecomposition.
    /// Eigenvalues at or below [`RANK_CUTOFF`] are dropped.
    pub fn refine_to_rank_one(&self) -> Result<RankOnePovm> {
        self.validate()?;
        let mut elements = Vec::new();
        for (parent, e) in self.elements.iter().enumerate() {
            let eig = SymmetricEigen::new(hermitize(e));
            for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
                if lambda > RANK_CUTOFF {
                    let v = eig.eigenvectors.column(j).into_owned();
                    let v = &v / C64::from(v.norm());
                    elements.push(RankOneElement { weight: lambda, direction: v, parent });
                }
            }
        }
        Ok(RankOnePovm { dim: self.dim(), parents: self.len(), elements })
    }
}

/// `weight * |direction><direction|`, remembering which element of the
/// original POVM it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct RankOneElement {
    pub weight: f64,
    pub direction: CVector,
    pub parent: usize,
}

impl RankOneElement {
    pub fn matrix(&self) -> CMatrix {
        &self.direction * self.direction.adjoint() * C64::from(self.weight)
    }
}

/// A POVM all of whose elements are rank one.
#[derive(Debug, Clone, PartialEq)]
pub struct RankOnePovm {
    dim: usize,
    parents: usize,
    elements: Vec<RankOneElement>,
}

impl RankOnePovm {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[RankOneElement] {
        &self.elements
    }

    /// Number of outcomes of the POVM this one was refined from.
    pub fn parent_count(&self) -> usize {
        self.parents
    }

    /// `sum_a |x_a|`, which equals `d` for a complete measurement.
    pub fn weight_sum(&self) -> f64 {
        self.elements.iter().map(|e| e.weight).sum()
    }

    /// Errors unless the weights sum to `d` within `1e-8`.
    pub fn check_weight_sum(&self) -> Result<()> {
        let sum = self.weight_sum();
        if (sum - self.dim as f64).abs() > 1e-8 {
            return Err(Error::PovmViolation {
                invariant: PovmInvariant::Completeness,
                element: 0,
                deviation: (sum - self.dim as f64).abs(),
            });
        }
        Ok(())
    }

    /// The refined POVM with one outcome per rank-one element.
    pub fn to_povm(&self) -> Povm {
        Povm { elements: self.elements.iter().map(RankOneElement::matrix).collect() }
    }

    /// Sums refined-outcome probabilities back onto the parent outcomes.
    pub fn coarse_grain(&self, refined: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.parents];
        for (e, p) in self.elements.iter().zip(refined) {
            out[e.parent] += p;
        }
        out
    }
}
