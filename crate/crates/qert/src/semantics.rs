//! Denotational semantics: each program denotes a trace-nonincreasing
//! superoperator, computed here in matrix (Liouville) representation.
//!
//! Structural clauses:
//!
//! - `skip` → identity;
//! - `q := |0>` → Kraus set `{|0⟩⟨n|}` on the variable, embedded;
//! - unitary → single embedded Kraus operator `U`;
//! - `S1; S2` → composition (S1 first);
//! - `if` → `Σ_m [[S_m]] ∘ E_{M_m}`;
//! - `while` → `E_0 ∘ (I − N′)^{-1}` where `N′` is the transfer matrix of
//!   `[[body]] ∘ E_1` with its peripheral spectrum removed
//!   ([`spectral_split`](crate::spectral::spectral_split)).
//!
//! The loop clause is the closed form of the limit `Σ_k E_0 ∘ ([[body]] ∘
//! E_1)^k`: probability mass recirculating forever (the peripheral part)
//! contributes nothing to the limit because `E_0` kills it, so removing it
//! before the Neumann inversion is exact. Unit tests cross-check against
//! truncated sums.

use crate::analyzer::Observable;
use crate::channel::{dual_matrix, superop_matrix, KrausSet, SuperOpMatrix};
use crate::error::{Error, Result};
use crate::linalg::{self, c64, hermiticity_defect, CMatrix, CVector};
use crate::program::{Layout, MeasurementDecl, Program, Stmt, VarId};
use crate::spectral::{neumann_sum, spectral_split};
use crate::tol;

// ----- Density matrices -----

/// A partial density operator: positive semidefinite, trace at most one.
///
/// The trace deficit of a partial state is the probability mass that has
/// already branched away (e.g. exited a loop).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    dim: usize,
    matrix: CMatrix,
}

impl DensityMatrix {
    /// Validates and wraps a matrix (Hermitian, PSD, trace ≤ 1, all within
    /// the crate tolerances). The stored matrix is exactly symmetrized.
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::NotSquare {
                rows: matrix.nrows(),
                cols: matrix.ncols(),
            });
        }
        let defect = hermiticity_defect(&matrix);
        if defect > tol::TOL_HERMITIAN {
            return Err(Error::InvalidDensity {
                reason: format!("not Hermitian (max |ρ − ρ†| = {defect:.3e})"),
            });
        }
        let sym = (&matrix + matrix.adjoint()).scale(0.5);
        let (eigs, _) = linalg::hermitian_eigensystem(&sym)?;
        if let Some(&lo) = eigs.first() {
            if lo < -tol::TOL_PSD {
                return Err(Error::InvalidDensity {
                    reason: format!("negative eigenvalue {lo:.3e}"),
                });
            }
        }
        let trace = sym.trace().re;
        if trace > 1.0 + tol::TOL_TRACE {
            return Err(Error::InvalidDensity {
                reason: format!("trace {trace:.12} exceeds 1"),
            });
        }
        Ok(DensityMatrix {
            dim: sym.nrows(),
            matrix: sym,
        })
    }

    /// `|ψ⟩⟨ψ|` for a (possibly subnormalized) state vector.
    pub fn pure(psi: &CVector) -> Result<Self> {
        let n = psi.norm();
        if n > 1.0 + tol::TOL_TRACE {
            return Err(Error::InvalidState {
                reason: format!("state norm {n:.12} exceeds 1"),
            });
        }
        let m = psi * psi.adjoint();
        DensityMatrix::new(m)
    }

    /// `|k⟩⟨k|` in dimension `d`.
    pub fn basis_state(d: usize, k: usize) -> Result<Self> {
        if k >= d {
            return Err(Error::InvalidState {
                reason: format!("basis index {k} out of range for dimension {d}"),
            });
        }
        let mut m = CMatrix::zeros(d, d);
        m[(k, k)] = c64(1.0, 0.0);
        Ok(DensityMatrix { dim: d, matrix: m })
    }

    /// `I/d`.
    pub fn maximally_mixed(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidState {
                reason: "zero-dimensional space".into(),
            });
        }
        Ok(DensityMatrix {
            dim: d,
            matrix: CMatrix::identity(d, d).unscale(d as f64),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    /// Eigenvector ensemble `{(w_k, |v_k⟩)}` with `Σ w_k = tr ρ`.
    ///
    /// Weights below 1e-12 are dropped; tiny negative weights (numerical
    /// noise within the PSD tolerance) are clipped away with them.
    pub fn eigen_ensemble(&self) -> Result<Vec<(f64, CVector)>> {
        let (eigs, vecs) = linalg::hermitian_eigensystem(&self.matrix)?;
        let mut out = Vec::new();
        for (k, &w) in eigs.iter().enumerate() {
            if w > 1e-12 {
                out.push((w, vecs.column(k).into_owned()));
            }
        }
        Ok(out)
    }
}

// ----- Guard superoperators -----

/// One measurement outcome as a superoperator on the full space.
#[derive(Debug, Clone)]
pub struct GuardOutcome {
    pub label: usize,
    /// The single-operator Kraus set `ρ ↦ M_m ρ M_m†`, embedded.
    pub kraus: KrausSet,
    pub matrix: SuperOpMatrix,
}

/// The per-outcome superoperators `E_{M_m}` of one measurement site.
#[derive(Debug, Clone)]
pub struct GuardOps {
    outcomes: Vec<GuardOutcome>,
}

impl GuardOps {
    pub fn outcomes(&self) -> &[GuardOutcome] {
        &self.outcomes
    }

    pub fn outcome(&self, label: usize) -> Option<&GuardOutcome> {
        self.outcomes.iter().find(|o| o.label == label)
    }

    /// Exit guard of a loop (outcome 0).
    pub fn e0(&self) -> Result<&GuardOutcome> {
        self.outcome(0)
            .ok_or_else(|| Error::invalid("guard has no outcome 0"))
    }

    /// Continue guard of a loop (outcome 1).
    pub fn e1(&self) -> Result<&GuardOutcome> {
        self.outcome(1)
            .ok_or_else(|| Error::invalid("guard has no outcome 1"))
    }
}

/// Embeds every outcome of a measurement into the full space.
pub fn guard_ops(meas: &MeasurementDecl, targets: &[VarId], layout: &Layout) -> Result<GuardOps> {
    let mut outcomes = Vec::with_capacity(meas.outcomes.len());
    for (label, op) in &meas.outcomes {
        let embedded = layout.embed(op, targets)?;
        let kraus = KrausSet::single(embedded)?;
        let matrix = superop_matrix(&kraus);
        outcomes.push(GuardOutcome {
            label: *label,
            kraus,
            matrix,
        });
    }
    Ok(GuardOps { outcomes })
}

/// Kraus set of an initialization statement: `{|0⟩⟨n|}` on the variable.
///
/// The resulting channel is independent of the orthonormal basis used for
/// the `⟨n|` side (it maps ρ to `tr_q-style` collapse onto the ground
/// state); the computational basis is used here.
pub fn init_kraus(layout: &Layout, var: VarId) -> Result<KrausSet> {
    let d = *layout
        .dims()
        .get(var)
        .ok_or_else(|| Error::invalid(format!("variable index {var} out of range")))?;
    let mut ops = Vec::with_capacity(d);
    for n in 0..d {
        let mut m = CMatrix::zeros(d, d);
        m[(0, n)] = c64(1.0, 0.0);
        ops.push(layout.embed(&m, &[var])?);
    }
    KrausSet::new(ops)
}

/// Kraus set of a unitary statement: the embedded gate alone.
pub fn unitary_kraus(program: &Program, layout: &Layout, gate: usize, targets: &[VarId]) -> Result<KrausSet> {
    let g = program
        .gates
        .get(gate)
        .ok_or_else(|| Error::invalid(format!("gate index {gate} out of range")))?;
    KrausSet::single(layout.embed(&g.matrix, targets)?)
}

// ----- Denotation -----

/// Matrix representation of `[[S]]` for a whole program, with the default
/// peripheral-classification band.
pub fn denote(program: &Program, layout: &Layout) -> Result<SuperOpMatrix> {
    denote_stmt(program, layout, &program.body, tol::EPS_SPEC)
}

/// Matrix representation of `[[stmt]]` for any statement of a program.
pub fn denote_stmt(
    program: &Program,
    layout: &Layout,
    stmt: &Stmt,
    eps_spec: f64,
) -> Result<SuperOpMatrix> {
    let d = layout.total_dim();
    match stmt {
        Stmt::Skip => Ok(SuperOpMatrix::identity(d)),
        Stmt::Init { var } => Ok(superop_matrix(&init_kraus(layout, *var)?)),
        Stmt::Unitary { gate, targets } => {
            Ok(superop_matrix(&unitary_kraus(program, layout, *gate, targets)?))
        }
        Stmt::Seq(a, b) => {
            let ma = denote_stmt(program, layout, a, eps_spec)?;
            let mb = denote_stmt(program, layout, b, eps_spec)?;
            mb.compose(&ma)
        }
        Stmt::Case {
            meas,
            targets,
            branches,
        } => {
            let guards = guard_ops(&program.measurements[*meas], targets, layout)?;
            let mut sum = CMatrix::zeros(d * d, d * d);
            for (label, branch) in branches {
                let e = guards
                    .outcome(*label)
                    .ok_or_else(|| Error::invalid(format!("no outcome {label} in guard")))?;
                let mb = denote_stmt(program, layout, branch, eps_spec)?;
                sum += mb.matrix() * e.matrix.matrix();
            }
            SuperOpMatrix::from_raw(d, sum)
        }
        Stmt::While { meas, targets, body } => {
            let guards = guard_ops(&program.measurements[*meas], targets, layout)?;
            let e0 = guards.e0()?;
            let e1 = guards.e1()?;
            let mb = denote_stmt(program, layout, body, eps_spec)?;
            // Transfer matrix of one loop turn that stays inside the loop.
            let r = mb.matrix() * e1.matrix.matrix();
            let split = spectral_split(&r, eps_spec)?;
            let inv = neumann_sum(&split.n, eps_spec)?;
            SuperOpMatrix::from_raw(d, e0.matrix.matrix() * inv)
        }
    }
}

/// Schrödinger-picture application: `ρ ↦ unvec(M·vec(ρ))`.
pub fn apply(superop: &SuperOpMatrix, rho: &DensityMatrix) -> Result<DensityMatrix> {
    if superop.dim() != rho.dim() {
        return Err(Error::Dimension {
            context: "apply",
            expected: superop.dim(),
            found: rho.dim(),
        });
    }
    let v = superop.matrix() * linalg::vec(rho.matrix())?;
    DensityMatrix::new(linalg::unvec(&v, rho.dim())?)
}

/// Heisenberg-picture application: `A ↦ unvec(M†·vec(A))`.
///
/// Satisfies `tr(dual_apply(M, A)·ρ) = tr(A·apply(M, ρ))`.
pub fn dual_apply(superop: &SuperOpMatrix, obs: &Observable) -> Result<Observable> {
    if superop.dim() != obs.dim() {
        return Err(Error::Dimension {
            context: "dual_apply",
            expected: superop.dim(),
            found: obs.dim(),
        });
    }
    let dual = dual_matrix(superop);
    let v = dual.matrix() * linalg::vec(obs.matrix())?;
    Observable::new(linalg::unvec(&v, obs.dim())?)
}
