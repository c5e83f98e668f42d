//! Numeric tolerances used across the crate.
//!
//! All are absolute bounds on max-abs entries of residual matrices unless
//! stated otherwise. Keeping them in one place prevents silent drift between
//! validation, analysis, and test code.

/// Max-abs residual allowed for `U·U† − I` when validating a gate.
///
/// Double-precision inputs are exact to ~1e-15; 1e-10 additionally absorbs
/// user-entered rounded constants such as `0.70710678`.
pub const TOL_UNITARY: f64 = 1e-10;

/// Max-abs residual allowed for `Σ M_m†·M_m − I` when validating a
/// measurement. Same rationale as [`TOL_UNITARY`].
pub const TOL_COMPLETE: f64 = 1e-10;

/// Default classification band for the peripheral spectrum: eigenvalues of a
/// transfer matrix with modulus ≥ `1 − EPS_SPEC` are treated as lying on the
/// unit circle and are removed before summing the Neumann series.
///
/// Transfer matrices of valid programs have exactly-peripheral eigenvalues
/// perturbed only by rounding; 1e-8 is far above the accumulation error at
/// the supported dimensions (d² ≤ 16384) and far below every genuinely
/// contractive eigenvalue in the bundled corpus.
pub const EPS_SPEC: f64 = 1e-8;

/// Almost-sure-termination gate: an input ρ is classified terminating when
/// `tr(B·ρ) ≥ tr(ρ) − TOL_AST`, with B the termination operator. The trace
/// error accumulates through one d²×d² solve; 1e-7 still cleanly separates
/// "exactly 1" from every genuine sub-unit termination probability in the
/// corpus.
pub const TOL_AST: f64 = 1e-7;

/// Eigenvalue-1 cluster width for the termination operator: eigenvalues
/// ≥ `1 − EPS_TERM` count toward the terminating subspace. The operator is
/// Hermitian and its eigensolve backward-stable; corpus spectra show gaps
/// ≫ 1e-4.
pub const EPS_TERM: f64 = 1e-6;

/// Residual bound `‖(I−N)·X − I‖_max` checked after every Neumann-series
/// inversion.
pub const TOL_NEUMANN: f64 = 1e-9;

/// Hermiticity slack `‖A − A†‖_max` accepted when constructing observables
/// and density matrices.
pub const TOL_HERMITIAN: f64 = 1e-9;

/// Eigenvalues of a density matrix or observable may undershoot zero by this
/// much and still count as positive semidefinite.
pub const TOL_PSD: f64 = 1e-9;

/// Trace of a density matrix may overshoot 1 by this much.
pub const TOL_TRACE: f64 = 1e-9;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bands_are_ordered() {
        assert!(TOL_UNITARY < EPS_TERM);
        assert!(EPS_SPEC < EPS_TERM);
        assert!(TOL_NEUMANN < TOL_AST);
        assert!(EPS_TERM < TOL_AST * 100.0);
    }
}
