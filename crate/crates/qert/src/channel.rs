//! Completely positive maps as Kraus sets and their transfer matrices.
//!
//! A trace-nonincreasing map `E(ρ) = Σ_m M_m ρ M_m†` acts on row-major
//! vectorized operators as the d²×d² matrix `M_E = Σ_m M_m ⊗ M_m*`, so that
//! `M_E·vec(A) = vec(E(A))`. The dual (Heisenberg-picture) map satisfies
//! `M_{E*} = (M_E)†`; both identities are exercised by the test suite.


use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigensystem, kron, CMatrix};
use crate::tol;

/// A completely positive trace-nonincreasing map given by Kraus operators.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausSet {
    dim: usize,
    operators: Vec<CMatrix>,
}

impl KrausSet {
    /// Builds a Kraus set, checking shape and the trace-nonincrease bound
    /// `Σ M_m†M_m ⊑ I` (largest eigenvalue ≤ 1 within tolerance).
    pub fn new(operators: Vec<CMatrix>) -> Result<Self> {
        let Some(first) = operators.first() else {
            return Err(Error::invalid("Kraus set must be nonempty"));
        };
        if first.nrows() != first.ncols() {
            return Err(Error::NotSquare {
                rows: first.nrows(),
                cols: first.ncols(),
            });
        }
        let dim = first.nrows();
        for m in &operators {
            if m.shape() != (dim, dim) {
                return Err(Error::Dimension {
                    context: "Kraus operator shape",
                    expected: dim,
                    found: m.nrows(),
                });
            }
        }
        let mut gram = CMatrix::zeros(dim, dim);
        for m in &operators {
            gram += m.adjoint() * m;
        }
        let (eigs, _) = hermitian_eigensystem(&gram)?;
        let top = eigs.last().copied().unwrap_or(0.0);
        if top > 1.0 + tol::TOL_COMPLETE {
            return Err(Error::invalid(format!(
                "Kraus set increases trace: largest eigenvalue of ΣM†M is {top:.12}"
            )));
        }
        Ok(KrausSet { dim, operators })
    }

    /// Single-operator map `ρ ↦ MρM†` (no completeness requirement beyond
    /// trace non-increase).
    pub fn single(m: CMatrix) -> Result<Self> {
        KrausSet::new(vec![m])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn operators(&self) -> &[CMatrix] {
        &self.operators
    }

    /// Direct Schrödinger-picture application `Σ M ρ M†`.
    pub fn apply(&self, rho: &CMatrix) -> Result<CMatrix> {
        self.check_dim(rho)?;
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for m in &self.operators {
            out += m * rho * m.adjoint();
        }
        Ok(out)
    }

    /// Direct Heisenberg-picture application `Σ M† A M`.
    pub fn dual_apply(&self, a: &CMatrix) -> Result<CMatrix> {
        self.check_dim(a)?;
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for m in &self.operators {
            out += m.adjoint() * a * m;
        }
        Ok(out)
    }

    fn check_dim(&self, a: &CMatrix) -> Result<()> {
        if a.shape() != (self.dim, self.dim) {
            return Err(Error::Dimension {
                context: "Kraus application",
                expected: self.dim,
                found: a.nrows(),
            });
        }
        Ok(())
    }
}

/// The d²×d² transfer matrix of a completely positive map.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperOpMatrix {
    dim: usize,
    matrix: CMatrix,
}

impl SuperOpMatrix {
    /// Wraps a raw d²×d² matrix acting on vectorized operators.
    pub fn from_raw(dim: usize, matrix: CMatrix) -> Result<Self> {
        if matrix.shape() != (dim * dim, dim * dim) {
            return Err(Error::Dimension {
                context: "transfer matrix shape",
                expected: dim * dim,
                found: matrix.nrows(),
            });
        }
        Ok(SuperOpMatrix { dim, matrix })
    }

    pub fn identity(dim: usize) -> Self {
        SuperOpMatrix {
            dim,
            matrix: CMatrix::identity(dim * dim, dim * dim),
        }
    }

    /// Underlying operator-space dimension d (the matrix is d²×d²).
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    /// Composition `self ∘ other` (apply `other` first).
    pub fn compose(&self, other: &SuperOpMatrix) -> Result<SuperOpMatrix> {
        if self.dim != other.dim {
            return Err(Error::Dimension {
                context: "transfer composition",
                expected: self.dim,
                found: other.dim,
            });
        }
        Ok(SuperOpMatrix {
            dim: self.dim,
            matrix: &self.matrix * &other.matrix,
        })
    }
}

/// Transfer matrix `M_E = Σ_m M_m ⊗ M_m*` of a Kraus set.
pub fn superop_matrix(k: &KrausSet) -> SuperOpMatrix {
    let d = k.dim();
    let mut m = CMatrix::zeros(d * d, d * d);
    for op in k.operators() {
        let conj = op.map(|z| z.conj());
        m += kron(op, &conj);
    }
    SuperOpMatrix { dim: d, matrix: m }
}

/// Transfer matrix of the dual map: the conjugate transpose of `M_E`.
pub fn dual_matrix(m: &SuperOpMatrix) -> SuperOpMatrix {
    SuperOpMatrix {
        dim: m.dim,
        matrix: m.matrix.adjoint(),
    }
}

/// Seeded random-instance generators for tests; not part of the stable API.
#[doc(hidden)]
pub mod testkit {
    use super::*;
    use crate::linalg::c64;
    use nalgebra::DMatrix;
    use rand::Rng;
    use rand_chacha::ChaCha8Rng;

    /// Square matrix with entries uniform in the unit box.
    pub fn random_cmatrix(rng: &mut ChaCha8Rng, d: usize) -> CMatrix {
        CMatrix::from_fn(d, d, |_, _| {
            c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    /// Random trace-preserving Kraus set: arbitrary operators renormalized by
    /// the inverse square root of their Gram sum.
    pub fn random_cptp(rng: &mut ChaCha8Rng, d: usize, n_ops: usize) -> KrausSet {
        let raw: Vec<CMatrix> = (0..n_ops).map(|_| random_cmatrix(rng, d)).collect();
        let mut gram = CMatrix::zeros(d, d);
        for m in &raw {
            gram += m.adjoint() * m;
        }
        let (vals, vecs) = hermitian_eigensystem(&gram).unwrap();
        let inv_sqrt = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            d,
            vals.iter().map(|&v| c64(1.0 / v.sqrt(), 0.0)),
        ));
        let t = &vecs * inv_sqrt * vecs.adjoint();
        KrausSet::new(raw.into_iter().map(|m| m * &t).collect()).unwrap()
    }
}
