//! Termination analysis and the expected-runtime observable.
//!
//! For a program `S` let `B = [[S]]*(I)`; then `tr(Bρ)` is the probability
//! that `S` terminates from `ρ`. The analyzer computes:
//!
//! - `B` itself ([`termination_operator`]);
//! - the projector `P` onto the eigenvalue-1 eigenspace of `B` — the
//!   subspace of states that terminate almost surely
//!   ([`termination_projector`]);
//! - the runtime observable `ert[S]` whose quadratic form gives the expected
//!   runtime on almost-surely-terminating inputs ([`ert_observable`]);
//! - the verdict-gated value `ERT[S](ρ) = tr(ert[S]·ρ)` or `∞`
//!   ([`expected_runtime`]), the equivalence "finite expected runtime ⟺
//!   almost-sure termination" holding in finite dimension;
//! - the uniform bound `max_ρ ERT[S](ρ) = λ_max(ert[S])` ([`runtime_bound`]).
//!
//! Cost model: initializations, unitaries, and measurements cost 1 step
//! each; `skip` costs 0.
//!
//! The loop clause of the `ert` recursion sums the series
//! `Σ_k (E_1* ∘ [[body]]*)^k` applied to `I + E_1*(ert[body])`, sandwiched
//! by the loop's own termination projector so the result stays finite even
//! when part of the space diverges; divergence surfaces only through the
//! verdict gate.

use crate::error::{Error, Result};
use crate::linalg::{self, hermiticity_defect, kron, CMatrix};
use crate::program::{Layout, Program, Stmt};
use crate::semantics::{self, guard_ops, DensityMatrix};
use crate::spectral::{neumann_sum, spectral_split};
use crate::tol;

// ----- Observables -----

/// A Hermitian operator used as a runtime or termination observable.
///
/// The constructor validates Hermiticity and stores the exactly
/// symmetrized matrix. Positive semidefiniteness is a property of the
/// analyzer's outputs, asserted in tests rather than at construction (the
/// dual of a channel acts on arbitrary Hermitian observables).
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    dim: usize,
    matrix: CMatrix,
}

impl Observable {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::NotSquare {
                rows: matrix.nrows(),
                cols: matrix.ncols(),
            });
        }
        let defect = hermiticity_defect(&matrix);
        if defect > tol::TOL_HERMITIAN {
            return Err(Error::NotHermitian { residual: defect });
        }
        let sym = (&matrix + matrix.adjoint()).scale(0.5);
        Ok(Observable {
            dim: sym.nrows(),
            matrix: sym,
        })
    }

    pub fn zero(d: usize) -> Self {
        Observable {
            dim: d,
            matrix: CMatrix::zeros(d, d),
        }
    }

    pub fn identity(d: usize) -> Self {
        Observable {
            dim: d,
            matrix: CMatrix::identity(d, d),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// `tr(A·ρ)` (real; the imaginary part of the trace is numerical noise).
    pub fn expectation(&self, rho: &DensityMatrix) -> Result<f64> {
        if rho.dim() != self.dim {
            return Err(Error::Dimension {
                context: "expectation",
                expected: self.dim,
                found: rho.dim(),
            });
        }
        Ok((&self.matrix * rho.matrix()).trace().re)
    }

    /// Smallest and largest eigenvalue.
    pub fn eigen_range(&self) -> Result<(f64, f64)> {
        let (eigs, _) = linalg::hermitian_eigensystem(&self.matrix)?;
        Ok((
            eigs.first().copied().unwrap_or(0.0),
            eigs.last().copied().unwrap_or(0.0),
        ))
    }
}

/// Termination data of a program.
#[derive(Debug, Clone)]
pub struct TerminationInfo {
    /// `B = [[S]]*(I)`; `tr(Bρ)` is the termination probability from ρ.
    pub b: Observable,
    /// Hermitian projector onto the almost-surely-terminating subspace
    /// (eigenvalue-1 eigenspace of `B`).
    pub projector: CMatrix,
    /// Dimension of that subspace.
    pub as_dim: usize,
}

/// Expected runtime: a nonnegative real or infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ErtValue {
    Finite(f64),
    Infinite,
}

impl ErtValue {
    pub fn is_finite(&self) -> bool {
        matches!(self, ErtValue::Finite(_))
    }

    pub fn finite(&self) -> Option<f64> {
        match self {
            ErtValue::Finite(v) => Some(*v),
            ErtValue::Infinite => None,
        }
    }
}

// ----- Termination -----

/// `B = [[S]]*(I)`, satisfying `0 ⊑ B ⊑ I`.
pub fn termination_operator(program: &Program, layout: &Layout) -> Result<Observable> {
    termination_operator_with(program, layout, tol::EPS_SPEC)
}

pub fn termination_operator_with(
    program: &Program,
    layout: &Layout,
    eps_spec: f64,
) -> Result<Observable> {
    let m = semantics::denote_stmt(program, layout, &program.body, eps_spec)?;
    semantics::dual_apply(&m, &Observable::identity(layout.total_dim()))
}

/// Projector onto the eigenvalue-1 eigenspace of a Hermitian `b` with
/// `0 ⊑ b ⊑ I` (eigenvalues within `eps_term` of 1 count as 1).
fn eigenspace_one_projector(b: &CMatrix, eps_term: f64) -> Result<(CMatrix, usize)> {
    let (eigs, vecs) = linalg::hermitian_eigensystem(b)?;
    let d = b.nrows();
    let mut p = CMatrix::zeros(d, d);
    let mut count = 0;
    for (k, &lambda) in eigs.iter().enumerate() {
        if lambda >= 1.0 - eps_term {
            let v = vecs.column(k);
            p += v * v.adjoint();
            count += 1;
        }
    }
    Ok((p, count))
}

/// Termination operator, projector, and subspace dimension for a program.
pub fn termination_projector(program: &Program, layout: &Layout) -> Result<TerminationInfo> {
    termination_projector_with(program, layout, tol::EPS_SPEC)
}

pub fn termination_projector_with(
    program: &Program,
    layout: &Layout,
    eps_spec: f64,
) -> Result<TerminationInfo> {
    let b = termination_operator_with(program, layout, eps_spec)?;
    let (projector, as_dim) = eigenspace_one_projector(b.matrix(), tol::EPS_TERM)?;
    Ok(TerminationInfo { b, projector, as_dim })
}

// ----- The runtime observable -----

/// `ert[S]` for the whole program.
pub fn ert_observable(program: &Program, layout: &Layout) -> Result<Observable> {
    ert_observable_with(program, layout, tol::EPS_SPEC)
}

pub fn ert_observable_with(
    program: &Program,
    layout: &Layout,
    eps_spec: f64,
) -> Result<Observable> {
    ert_stmt(program, layout, &program.body, eps_spec)
}

fn ert_stmt(
    program: &Program,
    layout: &Layout,
    stmt: &Stmt,
    eps_spec: f64,
) -> Result<Observable> {
    let d = layout.total_dim();
    match stmt {
        Stmt::Skip => Ok(Observable::zero(d)),
        Stmt::Init { .. } | Stmt::Unitary { .. } => Ok(Observable::identity(d)),
        Stmt::Seq(a, b) => {
            let ert_a = ert_stmt(program, layout, a, eps_spec)?;
            let ert_b = ert_stmt(program, layout, b, eps_spec)?;
            let ma = semantics::denote_stmt(program, layout, a, eps_spec)?;
            let lifted = semantics::dual_apply(&ma, &ert_b)?;
            Observable::new(ert_a.matrix() + lifted.matrix())
        }
        Stmt::Case { meas, targets, branches } => {
            let guards = guard_ops(&program.measurements[*meas], targets, layout)?;
            let mut acc = CMatrix::identity(d, d);
            for (label, branch) in branches {
                let e = guards
                    .outcome(*label)
                    .ok_or_else(|| Error::invalid(format!("no outcome {label} in guard")))?;
                let ert_branch = ert_stmt(program, layout, branch, eps_spec)?;
                acc += semantics::dual_apply(&e.matrix, &ert_branch)?.matrix();
            }
            Observable::new(acc)
        }
        Stmt::While { meas, targets, body } => {
            let guards = guard_ops(&program.measurements[*meas], targets, layout)?;
            let e1 = guards.e1()?;
            let ert_body = ert_stmt(program, layout, body, eps_spec)?;
            // One full turn costs 1 (the guard) plus the body's runtime,
            // transported into the pre-measurement frame.
            let carried = semantics::dual_apply(&e1.matrix, &ert_body)?;
            let f = CMatrix::identity(d, d) + carried.matrix();
            let sandwich = loop_series_operator(program, layout, stmt, eps_spec)?;
            let v = sandwich * linalg::vec(&f)?;
            Observable::new(linalg::unvec(&v, d)?)
        }
    }
}

/// `M_P·(I − N)^{-1}` for a loop statement: the transfer-matrix series of
/// `E_1* ∘ [[body]]*` with the peripheral part removed, projected onto the
/// loop's almost-surely-terminating subspace on both sides.
fn loop_series_operator(
    program: &Program,
    layout: &Layout,
    stmt: &Stmt,
    eps_spec: f64,
) -> Result<CMatrix> {
    let Stmt::While { meas, targets, body } = stmt else {
        return Err(Error::invalid("loop_series_operator: not a loop"));
    };
    let guards = guard_ops(&program.measurements[*meas], targets, layout)?;
    let e1 = guards.e1()?;
    let mb = semantics::denote_stmt(program, layout, body, eps_spec)?;
    // Transfer matrix of the dual loop turn.
    let r = e1.matrix.matrix().adjoint() * mb.matrix().adjoint();
    let split = spectral_split(&r, eps_spec)?;
    let inv = neumann_sum(&split.n, eps_spec)?;
    // Projector of this loop's own termination operator.
    let m_loop = semantics::denote_stmt(program, layout, stmt, eps_spec)?;
    let b_loop = semantics::dual_apply(&m_loop, &Observable::identity(layout.total_dim()))?;
    let (p, _) = eigenspace_one_projector(b_loop.matrix(), tol::EPS_TERM)?;
    let m_p = kron(&p, &p.map(|z| z.conj()));
    Ok(m_p * inv)
}

/// Expected number of guard measurements of a program that is a single
/// loop: `unvec(M_P·(I − N)^{-1}·vec(I))`.
///
/// Its quadratic form on a state counts the expected guard evaluations
/// before exit (at least 1: the first measurement always happens). For the
/// walk programs this is the closed-form target matrix.
pub fn loop_guard_count(program: &Program, layout: &Layout) -> Result<Observable> {
    loop_guard_count_with(program, layout, tol::EPS_SPEC)
}

pub fn loop_guard_count_with(
    program: &Program,
    layout: &Layout,
    eps_spec: f64,
) -> Result<Observable> {
    if !matches!(program.body, Stmt::While { .. }) {
        return Err(Error::invalid("loop_guard_count: program body is not a loop"));
    }
    let d = layout.total_dim();
    let sandwich = loop_series_operator(program, layout, &program.body, eps_spec)?;
    let v = sandwich * linalg::vec(&CMatrix::identity(d, d))?;
    Observable::new(linalg::unvec(&v, d)?)
}

// ----- Verdicts and values -----

/// `ERT[S](ρ)`: finite iff `ρ` terminates almost surely.
pub fn expected_runtime(
    program: &Program,
    layout: &Layout,
    rho: &DensityMatrix,
) -> Result<ErtValue> {
    expected_runtime_with(program, layout, rho, tol::EPS_SPEC)
}

pub fn expected_runtime_with(
    program: &Program,
    layout: &Layout,
    rho: &DensityMatrix,
    eps_spec: f64,
) -> Result<ErtValue> {
    if rho.dim() != layout.total_dim() {
        return Err(Error::Dimension {
            context: "expected_runtime",
            expected: layout.total_dim(),
            found: rho.dim(),
        });
    }
    let b = termination_operator_with(program, layout, eps_spec)?;
    // Termination probability vs. total mass: equality ⟺ finite runtime.
    if b.expectation(rho)? < rho.trace() - tol::TOL_AST {
        return Ok(ErtValue::Infinite);
    }
    let ert = ert_observable_with(program, layout, eps_spec)?;
    Ok(ErtValue::Finite(ert.expectation(rho)?.max(0.0)))
}

/// Largest eigenvalue of `ert[S]`: a bound on `ERT[S](ρ)` uniform over all
/// almost-surely-terminating states.
pub fn runtime_bound(program: &Program, layout: &Layout) -> Result<f64> {
    let ert = ert_observable(program, layout)?;
    let (_, hi) = ert.eigen_range()?;
    Ok(hi.max(0.0))
}
