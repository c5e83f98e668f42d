//! Peripheral-spectrum splitting and Neumann sums.
//!
//! Transfer matrices of trace-nonincreasing maps have their spectrum inside
//! the closed unit disc. Summing the series `Σ_k R^k` requires first removing
//! the peripheral part (eigenvalues of modulus 1, which carry probability
//! mass that never exits a loop): [`spectral_split`] produces `N` agreeing
//! with `R` on the contractive invariant subspace and zero on the peripheral
//! one, after which `(I − N)^{-1}` exists and [`neumann_sum`] computes it.
//!
//! ## Method
//!
//! Never a Jordan form. The split works on a unitary triangularization:
//!
//! 1. complex Schur decomposition `R = Q·T·Q†`;
//! 2. bubble the contractive eigenvalues (`|λ| < 1 − eps`) to the leading
//!    diagonal positions of `T` with adjacent Givens swaps;
//! 3. decouple the two diagonal clusters by solving the triangular Sylvester
//!    equation `T₁₁·Y − Y·T₂₂ = −T₁₂`;
//! 4. zero the peripheral cluster and transform back.
//!
//! Everything is unitary except the (well-conditioned, cluster-separated)
//! Sylvester solve, so no eigenvector-basis inversion ever happens.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{max_abs, CMatrix};
use crate::tol;

/// Unitary triangularization `m = Q·T·Q†` that survives structured stalls.
///
/// The shifted-QR iteration backing [`nalgebra::Schur`] draws its shifts
/// from the trailing diagonal. Transfer matrices of bipartite maps (walks
/// on even circles, for instance) keep that entry pinned at zero, so
/// eigenvalue pairs `±λ` of equal modulus never separate and the iteration
/// exhausts its cap. Conjugating by a random unitary breaks the structure
/// without touching the spectrum; the factor is rotated back afterwards.
/// The seed ladder is fixed, so behavior is deterministic, and every
/// candidate is accepted only after a reconstruction-residual check.
fn robust_schur(m: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    let d = m.nrows();
    let budget = 50 * d.max(20);
    let scale = max_abs(m).max(1.0);
    let accept =
        |q: &CMatrix, t: &CMatrix| max_abs(&(q * t * q.adjoint() - m)) <= 1e-10 * scale;

    if let Some(schur) = nalgebra::Schur::try_new(m.clone(), f64::EPSILON, budget) {
        let (q, t) = schur.unpack();
        if accept(&q, &t) {
            return Ok((q, t));
        }
    }
    for attempt in 0..6u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_BA5E + attempt);
        let g = CMatrix::from_fn(d, d, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let w = g.qr().q();
        let conj = &w * m * w.adjoint();
        if let Some(schur) = nalgebra::Schur::try_new(conj, f64::EPSILON, budget) {
            let (rotated, t) = schur.unpack();
            let q = w.adjoint() * rotated;
            if accept(&q, &t) {
                return Ok((q, t));
            }
        }
    }
    Err(Error::invalid(
        "Schur iteration failed to converge (even after randomized restarts)",
    ))
}

/// Result of removing the peripheral spectrum from a transfer matrix.
#[derive(Debug, Clone)]
pub struct SpectralSplit {
    /// The input with its peripheral invariant subspace zeroed.
    pub n: CMatrix,
    /// Idempotent projector onto the peripheral generalized eigenspace,
    /// along the contractive one (not Hermitian in general).
    pub peripheral_projector: CMatrix,
    /// Number of peripheral eigenvalues (with multiplicity).
    pub peripheral_dim: usize,
    /// Classification band used: `|λ| ≥ 1 − eps_spec` counts as peripheral.
    pub eps_spec: f64,
}

/// Splits `r` into contractive part `N` and peripheral projector.
///
/// Errors if any eigenvalue has modulus above `1 + eps_spec` (the matrix
/// then does not represent a trace-nonincreasing map).
pub fn spectral_split(r: &CMatrix, eps_spec: f64) -> Result<SpectralSplit> {
    if r.nrows() != r.ncols() {
        return Err(Error::NotSquare {
            rows: r.nrows(),
            cols: r.ncols(),
        });
    }
    let d = r.nrows();
    if d == 0 {
        return Err(Error::invalid("spectral_split: empty matrix"));
    }

    let (mut q, mut t) = robust_schur(r)?;

    let peripheral = |z: Complex64| z.norm() >= 1.0 - eps_spec;
    for i in 0..d {
        let m = t[(i, i)].norm();
        if m > 1.0 + eps_spec {
            return Err(Error::SpectrumExceedsUnit { modulus: m });
        }
    }

    // Bubble contractive eigenvalues to the top-left cluster.
    loop {
        let mut swapped = false;
        for i in 0..d - 1 {
            if peripheral(t[(i, i)]) && !peripheral(t[(i + 1, i + 1)]) {
                swap_adjacent(&mut t, &mut q, i);
                swapped = true;
            }
        }
        if !swapped {
            break;
        }
    }

    let k = (0..d).take_while(|&i| !peripheral(t[(i, i)])).count();
    let peripheral_dim = d - k;

    if peripheral_dim == 0 {
        return Ok(SpectralSplit {
            n: r.clone(),
            peripheral_projector: CMatrix::zeros(d, d),
            peripheral_dim,
            eps_spec,
        });
    }

    // T = [[T11, T12], [0, T22]] with T11 contractive (k×k), T22 peripheral.
    // Solve T11·Y − Y·T22 = −T12; then with V = [[I, Y], [0, I]]:
    //   T = V·blockdiag(T11, T22)·V⁻¹,
    //   N = Q·[[T11, −T11·Y], [0, 0]]·Q†,
    //   P = Q·[[0, Y], [0, I]]·Q†.
    let t11 = t.view((0, 0), (k, k)).into_owned();
    let t12 = t.view((0, k), (k, peripheral_dim)).into_owned();
    let t22 = t.view((k, k), (peripheral_dim, peripheral_dim)).into_owned();
    let y = solve_triangular_sylvester(&t11, &t22, &(-&t12))?;

    let mut n_mid = CMatrix::zeros(d, d);
    if k > 0 {
        n_mid.view_mut((0, 0), (k, k)).copy_from(&t11);
        n_mid
            .view_mut((0, k), (k, peripheral_dim))
            .copy_from(&(-(&t11 * &y)));
    }
    let mut p_mid = CMatrix::zeros(d, d);
    if k > 0 {
        p_mid.view_mut((0, k), (k, peripheral_dim)).copy_from(&y);
    }
    p_mid
        .view_mut((k, k), (peripheral_dim, peripheral_dim))
        .copy_from(&CMatrix::identity(peripheral_dim, peripheral_dim));

    Ok(SpectralSplit {
        n: &q * n_mid * q.adjoint(),
        peripheral_projector: &q * p_mid * q.adjoint(),
        peripheral_dim,
        eps_spec,
    })
}

/// Swaps the adjacent 1×1 diagonal blocks at positions (i, i+1) of the upper
/// triangular `t` by a unitary similarity, updating `q` accordingly.
fn swap_adjacent(t: &mut CMatrix, q: &mut CMatrix, i: usize) {
    let t11 = t[(i, i)];
    let t12 = t[(i, i + 1)];
    let t22 = t[(i + 1, i + 1)];
    // Eigenvector of [[t11, t12], [0, t22]] for t22 is (t12, t22 − t11);
    // a unitary with that as first column swaps the diagonal.
    let v1 = t12;
    let v2 = t22 - t11;
    let n = (v1.norm_sqr() + v2.norm_sqr()).sqrt();
    let (g11, g12, g21, g22) = if n == 0.0 {
        // Equal eigenvalues, already block-diagonal: plain permutation.
        let one = Complex64::ONE;
        let zero = Complex64::ZERO;
        (zero, one, one, zero)
    } else {
        (v1 / n, -(v2.conj()) / n, v2 / n, v1.conj() / n)
    };
    let d = t.nrows();
    // Columns: T[:, i..i+2] ← T[:, i..i+2]·G, same for Q.
    for r in 0..d {
        let a = t[(r, i)];
        let b = t[(r, i + 1)];
        t[(r, i)] = a * g11 + b * g21;
        t[(r, i + 1)] = a * g12 + b * g22;
        let a = q[(r, i)];
        let b = q[(r, i + 1)];
        q[(r, i)] = a * g11 + b * g21;
        q[(r, i + 1)] = a * g12 + b * g22;
    }
    // Rows: T[i..i+2, :] ← G†·T[i..i+2, :].
    for c in 0..d {
        let a = t[(i, c)];
        let b = t[(i + 1, c)];
        t[(i, c)] = g11.conj() * a + g21.conj() * b;
        t[(i + 1, c)] = g12.conj() * a + g22.conj() * b;
    }
    t[(i + 1, i)] = Complex64::ZERO;
    t[(i, i)] = t22;
    t[(i + 1, i + 1)] = t11;
}

/// Solves `A·Y − Y·B = C` for upper triangular `A` (k×k) and `B` (m×m) by
/// column-wise back-substitution. Requires the spectra of `A` and `B` to be
/// disjoint (guaranteed here by the contractive/peripheral separation).
fn solve_triangular_sylvester(a: &CMatrix, b: &CMatrix, c: &CMatrix) -> Result<CMatrix> {
    let k = a.nrows();
    let m = b.nrows();
    let mut y = CMatrix::zeros(k, m);
    for j in 0..m {
        // (A − B[j,j]·I)·y_j = c_j + Σ_{i<j} y_i·B[i,j]
        let mut rhs: Vec<Complex64> = (0..k).map(|r| c[(r, j)]).collect();
        for i in 0..j {
            let s = b[(i, j)];
            if s != Complex64::ZERO {
                for r in 0..k {
                    rhs[r] += y[(r, i)] * s;
                }
            }
        }
        let shift = b[(j, j)];
        for r in (0..k).rev() {
            let mut acc = rhs[r];
            for cc in r + 1..k {
                acc -= a[(r, cc)] * y[(cc, j)];
            }
            let diag = a[(r, r)] - shift;
            if diag.norm() < 1e-13 {
                return Err(Error::NeumannSingular {
                    reason: format!(
                        "cluster separation failed: eigenvalue gap {:.3e} at the \
                         peripheral classification boundary",
                        diag.norm()
                    ),
                });
            }
            y[(r, j)] = acc / diag;
        }
    }
    Ok(y)
}

/// Eigenvalues of a square complex matrix, from the Schur diagonal.
///
/// Order is unspecified.
pub fn eigenvalues(m: &CMatrix) -> Result<Vec<Complex64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    let d = m.nrows();
    if d == 0 {
        return Ok(Vec::new());
    }
    let (_, t) = robust_schur(m)?;
    Ok((0..d).map(|i| t[(i, i)]).collect())
}

/// Computes `(I − N)^{-1}` and verifies the residual.
///
/// `N` must come from [`spectral_split`] (spectral radius strictly below 1);
/// a singular or ill-conditioned solve indicates a peripheral eigenvalue
/// that escaped classification and is reported as an error.
pub fn neumann_sum(n: &CMatrix, _eps_spec: f64) -> Result<CMatrix> {
    if n.nrows() != n.ncols() {
        return Err(Error::NotSquare {
            rows: n.nrows(),
            cols: n.ncols(),
        });
    }
    let d = n.nrows();
    let a = CMatrix::identity(d, d) - n;
    let inv = a.clone().lu().try_inverse().ok_or_else(|| Error::NeumannSingular {
        reason: "I − N is singular".into(),
    })?;
    let residual = max_abs(&(&a * &inv - CMatrix::identity(d, d)));
    if residual > tol::TOL_NEUMANN {
        return Err(Error::NeumannSingular {
            reason: format!("inversion residual {residual:.3e} exceeds {:.1e}", tol::TOL_NEUMANN),
        });
    }
    Ok(inv)
}
