//! Builders for the benchmark programs (geometric coin, two-qubit Bernoulli
//! factory, cyclic quantum walk) and the closed-form guard-count matrix Q_n
//! for the walk, with its independent verification hooks.
//!
//! For the walk on an n-circle the loop guard fires once per iteration plus
//! once on exit; `Q_n` collects those counts as a quadratic form: starting
//! from state ψ the expected number of guard measurements is ⟨ψ|Q_n|ψ⟩.
//! `closed_form_q` assembles the matrix entrywise from explicit polynomial
//! formulas; `numeric_q` solves the defining linear fixed-point equation
//! instead. The two routes are kept fully independent so each checks the
//! other.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{c64, kron, max_abs_diff, unvec, vec, CMatrix};
use crate::program::{
    builtin_gate, builtin_measurement, MeasurementDecl, Program, QuantumVariable, Stmt,
    UnitaryDecl,
};

// ===================================================================
// Coin and walk specifications
// ===================================================================

/// A 2×2 coin `T = [[a, b], [b*, −a*]]` with |a|² + |b|² = 1.
#[derive(Debug, Clone, PartialEq)]
pub struct CoinSpec {
    a: Complex64,
    b: Complex64,
}

impl CoinSpec {
    /// Tolerance for the normalization constraint |a|² + |b|² = 1.
    pub const TOL_NORM: f64 = 1e-10;

    pub fn new(a: Complex64, b: Complex64) -> Result<Self> {
        let norm2 = a.norm_sqr() + b.norm_sqr();
        if (norm2 - 1.0).abs() > Self::TOL_NORM {
            return Err(Error::invalid(format!(
                "coin not normalized: |a|^2 + |b|^2 = {norm2} (must be 1 within {:.0e})",
                Self::TOL_NORM
            )));
        }
        Ok(CoinSpec { a, b })
    }

    pub fn real(a: f64, b: f64) -> Result<Self> {
        Self::new(c64(a, 0.0), c64(b, 0.0))
    }

    /// The balanced coin a = b = 1/√2.
    pub fn hadamard() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        CoinSpec { a: c64(s, 0.0), b: c64(s, 0.0) }
    }

    pub fn a(&self) -> Complex64 {
        self.a
    }

    pub fn b(&self) -> Complex64 {
        self.b
    }

    /// Whether both amplitudes are real (imaginary parts exactly zero).
    pub fn is_real(&self) -> bool {
        self.a.im == 0.0 && self.b.im == 0.0
    }

    /// The coin unitary `T = [[a, b], [b*, −a*]]`.
    pub fn matrix(&self) -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[self.a, self.b, self.b.conj(), -self.a.conj()])
    }
}

/// A coined walk on the n-circle: coin qubit (|L⟩, |R⟩) plus an n-level
/// position register, terminating when the position is measured at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkSpec {
    n: usize,
    coin: CoinSpec,
}

impl WalkSpec {
    pub fn new(n: usize, coin: CoinSpec) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid(format!(
                "walk circle needs at least 2 positions, got {n}"
            )));
        }
        Ok(WalkSpec { n, coin })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn coin(&self) -> &CoinSpec {
        &self.coin
    }

    /// Total Hilbert-space dimension 2n.
    pub fn dim(&self) -> usize {
        2 * self.n
    }
}

/// The guard-count matrix of a walk: Hermitian, 2n×2n, satisfying
/// `Q = I + E·Q·E†` for the walk's step contraction `E`.
#[derive(Debug, Clone, PartialEq)]
pub struct QnMatrix {
    n: usize,
    q: CMatrix,
}

impl QnMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.q
    }

    /// Expected guard count from the basis state |L,k⟩ (`left = true`)
    /// or |R,k⟩ (`left = false`).
    pub fn from_basis(&self, left: bool, k: usize) -> f64 {
        let i = if left { k } else { self.n + k };
        self.q[(i, i)].re
    }
}

// ===================================================================
// Program builders
// ===================================================================

/// One-qubit geometric program: `while std[q] == 1 do q := H[q] od`.
pub fn build_geo() -> Program {
    Program {
        vars: vec![QuantumVariable { name: "q".into(), dim: 2 }],
        gates: vec![builtin_gate("H", &[2]).expect("H is built in")],
        measurements: vec![builtin_measurement("std", &[2]).expect("std is built in")],
        body: Stmt::While {
            meas: 0,
            targets: vec![0],
            body: Box::new(Stmt::Unitary { gate: 0, targets: vec![0] }),
        },
    }
}

/// Two-qubit Bernoulli-factory program with bias parameter `p ∈ [0, 1]`.
///
/// Prepares both qubits in |1⟩, then loops: re-prepare each qubit in
/// √p|0⟩ + √(1−p)|1⟩, entangle with a fixed two-qubit unitary, and measure
/// the second qubit; the loop exits on outcome 0. On exit the first qubit
/// carries the amplitude (2p−1)|0⟩ + 2√(p(1−p))|1⟩. The expected runtime
/// is 17 regardless of p.
pub fn build_qbf(p: f64) -> Result<Program> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!(
            "bias parameter must lie in [0, 1], got {p}"
        )));
    }
    let sp = p.sqrt();
    let sq = (1.0 - p).sqrt();
    let up = UnitaryDecl {
        name: "Up".into(),
        dims: vec![2],
        matrix: CMatrix::from_row_slice(
            2,
            2,
            &[c64(sp, 0.0), c64(-sq, 0.0), c64(sq, 0.0), c64(sp, 0.0)],
        ),
        builtin: false,
    };
    let s = std::f64::consts::FRAC_1_SQRT_2;
    #[rustfmt::skip]
    let u_rows = [
        s,   0.0, 0.0, -s,
        s,   0.0, 0.0,  s,
        0.0, s,   s,    0.0,
        0.0, s,   -s,   0.0,
    ];
    let u = UnitaryDecl {
        name: "U".into(),
        dims: vec![2, 2],
        matrix: CMatrix::from_row_slice(4, 4, &u_rows.map(|x| c64(x, 0.0))),
        builtin: false,
    };
    let x = builtin_gate("X", &[2]).expect("X is built in");
    let std2 = builtin_measurement("std", &[2]).expect("std is built in");

    // Gate table order matches what parsing the printed text produces:
    // explicit declarations first, then built-ins in order of first use.
    let (g_up, g_u, g_x) = (0, 1, 2);
    let (q1, q2) = (0, 1);
    let loop_body = Stmt::seq_all(vec![
        Stmt::Init { var: q1 },
        Stmt::Unitary { gate: g_up, targets: vec![q1] },
        Stmt::Init { var: q2 },
        Stmt::Unitary { gate: g_up, targets: vec![q2] },
        Stmt::Unitary { gate: g_u, targets: vec![q1, q2] },
    ]);
    let body = Stmt::seq_all(vec![
        Stmt::Init { var: q1 },
        Stmt::Unitary { gate: g_x, targets: vec![q1] },
        Stmt::Init { var: q2 },
        Stmt::Unitary { gate: g_x, targets: vec![q2] },
        Stmt::While { meas: 0, targets: vec![q2], body: Box::new(loop_body) },
    ]);
    Ok(Program {
        vars: vec![
            QuantumVariable { name: "q1".into(), dim: 2 },
            QuantumVariable { name: "q2".into(), dim: 2 },
        ],
        gates: vec![up, u, x],
        measurements: vec![std2],
        body,
    })
}

/// Left-shift permutation `S_L = Σ_i |i⊖1⟩⟨i|` on an n-level register.
fn left_shift(n: usize) -> CMatrix {
    let mut m = CMatrix::zeros(n, n);
    for i in 0..n {
        m[((i + n - 1) % n, i)] = Complex64::ONE;
    }
    m
}

/// The walk's shift unitary on coin ⊗ position: |L⟩ moves the position one
/// step down (mod n), |R⟩ one step up.
pub fn shift_matrix(n: usize) -> CMatrix {
    let sl = left_shift(n);
    let mut s = CMatrix::zeros(2 * n, 2 * n);
    s.view_mut((0, 0), (n, n)).copy_from(&sl);
    s.view_mut((n, n), (n, n)).copy_from(&sl.adjoint());
    s
}

/// Cyclic-walk program:
/// `while N[p] == 1 do q := T[q]; q,p := S[q,p] od`
/// where `N` distinguishes position 0 (terminate) from the rest.
pub fn build_walk(spec: &WalkSpec) -> Program {
    let n = spec.n;
    let t = UnitaryDecl {
        name: "T".into(),
        dims: vec![2],
        matrix: spec.coin.matrix(),
        builtin: false,
    };
    let s = UnitaryDecl {
        name: "S".into(),
        dims: vec![2, n],
        matrix: shift_matrix(n),
        builtin: false,
    };
    let mut p0 = CMatrix::zeros(n, n);
    p0[(0, 0)] = Complex64::ONE;
    let guard = MeasurementDecl {
        name: "N".into(),
        dims: vec![n],
        outcomes: vec![(0, p0.clone()), (1, CMatrix::identity(n, n) - p0)],
        builtin: false,
    };
    let (q, p) = (0, 1);
    Program {
        vars: vec![
            QuantumVariable { name: "q".into(), dim: 2 },
            QuantumVariable { name: "p".into(), dim: n },
        ],
        gates: vec![t, s],
        measurements: vec![guard],
        body: Stmt::While {
            meas: 0,
            targets: vec![p],
            body: Box::new(Stmt::seq(
                Stmt::Unitary { gate: 0, targets: vec![q] },
                Stmt::Unitary { gate: 1, targets: vec![q, p] },
            )),
        },
    }
}

/// One-iteration contraction `E = M₁†·(T⊗I)†·S†`: the adjoint of the
/// "apply coin, shift, then pass the guard" step. `Q_n` is its fixed point
/// `Q = I + E·Q·E†`.
pub fn walk_contraction(spec: &WalkSpec) -> CMatrix {
    let n = spec.n;
    let mut m1 = CMatrix::identity(2 * n, 2 * n);
    m1[(0, 0)] = Complex64::ZERO;
    m1[(n, n)] = Complex64::ZERO;
    let t_full = kron(&spec.coin.matrix(), &CMatrix::identity(n, n));
    m1.adjoint() * t_full.adjoint() * shift_matrix(n).adjoint()
}

// ===================================================================
// Closed-form Q_n
// ===================================================================

/// Sign (−1)^{(j−k)/2}; requires 2 | (j−k).
fn half_parity_sign(j: usize, k: usize) -> f64 {
    let d = (j as i64 - k as i64) / 2;
    if d.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Entry generators for the closed form, parameterized by the ratios
/// b/a and (b/a)²  of a real coin.
struct EntryFormulas {
    n: usize,
    ratio: f64,
    ratio2: f64,
}

impl EntryFormulas {
    fn new(n: usize, coin: &CoinSpec) -> Result<Self> {
        if !coin.is_real() {
            return Err(Error::invalid(
                "closed-form guard counts need a real coin; reduce phases first",
            ));
        }
        let (a, b) = (coin.a.re, coin.b.re);
        if a == 0.0 {
            return Err(Error::invalid(
                "closed-form guard counts divide by the coin amplitude a, which is 0",
            ));
        }
        let ratio = b / a;
        Ok(EntryFormulas { n, ratio, ratio2: ratio * ratio })
    }

    /// Quadratic kernel: (−1)^{(j−k)/2} · (b/a)² · j · (n−1−k).
    fn f(&self, j: usize, k: usize) -> f64 {
        half_parity_sign(j, k) * self.ratio2 * (j as f64) * ((self.n - 1 - k) as f64)
    }

    /// Linear kernel: (−1)^{(j−k)/2} · (b/a) · (j+k−n).
    fn h(&self, j: usize, k: usize) -> f64 {
        half_parity_sign(j, k) * self.ratio * ((j + k) as f64 - self.n as f64)
    }
}

/// Assembles Q_n entrywise from the closed-form case analysis.
///
/// Requires a real coin with a ≠ 0. Block layout over (coin, position):
/// top-left `A` couples |L,·⟩ with |L,·⟩, bottom-right `C` the |R,·⟩ side,
/// and the off-diagonal blocks are `B†` / `B` with `B` supported on the
/// upper triangle 0 < j ≤ k < n. Entries not covered by the case analysis
/// are zero; `numeric_q` confirms that choice rather than trusting it.
pub fn closed_form_q(n: usize, coin: &CoinSpec) -> Result<QnMatrix> {
    if n < 2 {
        return Err(Error::invalid(format!(
            "walk circle needs at least 2 positions, got {n}"
        )));
    }
    let fh = EntryFormulas::new(n, coin)?;
    let wrap = |j: usize| (n - j) % n;

    let mut a = CMatrix::zeros(n, n);
    for j in 0..n {
        for k in 0..n {
            if j == k {
                a[(j, k)] = c64(fh.f(j, j) + (j + 1) as f64, 0.0);
            } else if (j as i64 - k as i64) % 2 == 0 {
                a[(j, k)] = c64(fh.f(j.min(k), j.max(k)), 0.0);
            }
        }
    }
    let mut b = CMatrix::zeros(n, n);
    for j in 1..n {
        for k in j..n {
            if (k - j) % 2 == 0 {
                b[(j, k)] = c64(fh.h(j, k), 0.0);
            }
        }
    }
    let mut q = CMatrix::zeros(2 * n, 2 * n);
    q.view_mut((0, 0), (n, n)).copy_from(&a);
    q.view_mut((0, n), (n, n)).copy_from(&b.adjoint());
    q.view_mut((n, 0), (n, n)).copy_from(&b);
    for j in 0..n {
        for k in 0..n {
            q[(n + j, n + k)] = a[(wrap(j), wrap(k))];
        }
    }
    Ok(QnMatrix { n, q })
}

// ===================================================================
// Numeric Q_n
// ===================================================================

/// Largest circle size for the dense 4n²×4n² fixed-point solve.
pub const MAX_NUMERIC_N: usize = 64;

/// Solves the fixed-point equation `Q = I + E·Q·E†` directly, as the linear
/// system `(I − E⊗E*)·vec(Q) = vec(I)`.
///
/// A singular system means the walk is not almost-surely terminating.
/// The residual of the fixed-point equation is re-checked on the solution
/// and must stay below 1e-8.
pub fn numeric_q(n: usize, coin: &CoinSpec) -> Result<QnMatrix> {
    if n < 2 {
        return Err(Error::invalid(format!(
            "walk circle needs at least 2 positions, got {n}"
        )));
    }
    if n > MAX_NUMERIC_N {
        return Err(Error::invalid(format!(
            "numeric guard-count solve is capped at n = {MAX_NUMERIC_N}, got {n}"
        )));
    }
    let spec = WalkSpec::new(n, coin.clone())?;
    let e = walk_contraction(&spec);
    let d = 2 * n;
    let system = CMatrix::identity(d * d, d * d) - kron(&e, &e.map(|z| z.conj()));
    let rhs = vec(&CMatrix::identity(d, d))?;
    let x = system.lu().solve(&rhs).ok_or_else(|| Error::NeumannSingular {
        reason: "guard-count system is singular: walk is not almost-surely terminating".into(),
    })?;
    let q_raw = unvec(&x, d)?;
    let residual = max_abs_diff(
        &q_raw,
        &(CMatrix::identity(d, d) + &e * &q_raw * e.adjoint()),
    );
    if residual > 1e-8 {
        return Err(Error::NeumannSingular {
            reason: format!(
                "guard-count fixed point residual {residual:.3e} exceeds 1e-8; \
                 walk may not be almost-surely terminating"
            ),
        });
    }
    let q = (&q_raw + q_raw.adjoint()).unscale(2.0);
    Ok(QnMatrix { n, q })
}

// ===================================================================
// Expected steps from amplitudes
// ===================================================================

/// Expected guard count from |Ψ⟩ = Σ_k (α_k|L,k⟩ + β_k|R,k⟩), evaluated
/// through the scalar expansion of ⟨Ψ|Q_n|Ψ⟩ (no matrix is formed; this is
/// an independent route cross-checked against `closed_form_q` in tests).
///
/// Requires a real coin with a ≠ 0 and a normalized amplitude vector.
pub fn expected_steps(spec: &WalkSpec, alpha: &[Complex64], beta: &[Complex64]) -> Result<f64> {
    let n = spec.n;
    if alpha.len() != n || beta.len() != n {
        return Err(Error::invalid(format!(
            "need {n} left and {n} right amplitudes, got {} and {}",
            alpha.len(),
            beta.len()
        )));
    }
    let norm2: f64 = alpha.iter().chain(beta).map(|z| z.norm_sqr()).sum();
    if (norm2 - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidState {
            reason: format!("amplitudes not normalized: Σ|·|² = {norm2}"),
        });
    }
    let fh = EntryFormulas::new(n, &spec.coin)?;
    let wrap = |j: usize| (n - j) % n;

    let mut total = 0.0;
    for j in 0..n {
        total += (fh.f(j, j) + (j + 1) as f64)
            * (alpha[j].norm_sqr() + beta[wrap(j)].norm_sqr());
    }
    for j in 1..n {
        total += fh.h(j, j) * 2.0 * (alpha[j].conj() * beta[j]).re;
    }
    for j in 1..n {
        for k in (j + 1)..n {
            if (k - j) % 2 != 0 {
                continue;
            }
            total += fh.f(j, k)
                * 2.0
                * ((alpha[j].conj() * alpha[k]).re
                    + (beta[wrap(j)].conj() * beta[wrap(k)]).re);
            total += fh.h(j, k) * 2.0 * (beta[j].conj() * alpha[k]).re;
        }
    }
    Ok(total)
}

// ===================================================================
// Phase reduction
// ===================================================================

/// Strips the phases off a complex coin: returns the real coin (|a|, |b|)
/// and the diagonal unitary `P` relating the two walks by
/// `E = P†·E′·P` and hence `Q_n = P†·Q_n′·P` (primes: real-coin walk).
///
/// For a coin that is already real and nonnegative, `P = I`.
pub fn phase_reduction(n: usize, coin: &CoinSpec) -> (CoinSpec, CMatrix) {
    let beta = -(coin.a.arg() + coin.b.arg()) / 2.0;
    let delta = (coin.b.arg() - coin.a.arg()) / 2.0;
    let rate = beta + delta;
    let mut phases = Vec::with_capacity(2 * n);
    for k in 0..n {
        phases.push(-rate * k as f64);
    }
    // Right-side phases carry a fixed 2δ offset; the k = 0 entry wraps
    // around the circle and picks up the full −rate·n instead of 0.
    phases.push(2.0 * delta - rate * n as f64);
    for k in 1..n {
        phases.push(2.0 * delta - rate * k as f64);
    }
    let p = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        2 * n,
        phases.into_iter().map(|th| Complex64::from_polar(1.0, th)),
    ));
    let real = CoinSpec { a: c64(coin.a.norm(), 0.0), b: c64(coin.b.norm(), 0.0) };
    (real, p)
}

// ===================================================================
// Fixed-point verification
// ===================================================================

/// Entrywise recurrence residual of the `A` block of a candidate fixed
/// point, with the coin entering only through a², b², ab. Checks
///   A[j,j] = 1 + a²·A[j⊖1,j⊖1] + b²·A[n⊖(j+1),n⊖(j+1)]   for 0 < j < n,
///   A[j,k] = a²·A[j⊖1,k⊖1] + b²·C[j⊕1,k⊕1] + ab·B[j⊕1,k⊖1] for 0 < j < k < n.
fn recurrence_residual(q: &CMatrix, n: usize, a2: f64, b2: f64, ab: f64) -> f64 {
    let aa = |j: usize, k: usize| q[(j, k)];
    let bb = |j: usize, k: usize| q[(n + j, k)];
    let cc = |j: usize, k: usize| q[(n + j, n + k)];
    let m1 = |j: usize| (j + n - 1) % n;
    let p1 = |j: usize| (j + 1) % n;
    let wrap = |j: usize| (n - j) % n;

    let mut worst = 0.0f64;
    for j in 1..n {
        let rhs = Complex64::from(1.0) + aa(m1(j), m1(j)).scale(a2)
            + aa(wrap(j + 1), wrap(j + 1)).scale(b2);
        worst = worst.max((aa(j, j) - rhs).norm());
    }
    for j in 1..n {
        for k in (j + 1)..n {
            let rhs = aa(m1(j), m1(k)).scale(a2)
                + cc(p1(j), p1(k)).scale(b2)
                + bb(p1(j), m1(k)).scale(ab);
            worst = worst.max((aa(j, k) - rhs).norm());
        }
    }
    worst
}

/// Max-abs residual of the fixed-point equation `Q − I − E·Q·E†`, combined
/// (for real coins) with the entrywise scalar recurrences on the `A` block.
/// A genuine guard-count matrix scores ≈ 0; anything else scores large.
pub fn verify_fixed_point(q: &QnMatrix, spec: &WalkSpec) -> Result<f64> {
    let n = spec.n;
    if q.n != n {
        return Err(Error::Dimension {
            context: "fixed-point check",
            expected: n,
            found: q.n,
        });
    }
    let e = walk_contraction(spec);
    let d = 2 * n;
    let operator_residual = max_abs_diff(
        &q.q,
        &(CMatrix::identity(d, d) + &e * &q.q * e.adjoint()),
    );
    let mut worst = operator_residual;
    if spec.coin.is_real() {
        let (a, b) = (spec.coin.a.re, spec.coin.b.re);
        worst = worst.max(recurrence_residual(&q.q, n, a * a, b * b, a * b));
    }
    Ok(worst)
}

// ===================================================================

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analyzer::{ert_observable, expected_runtime, loop_guard_count, ErtValue};
    use crate::linalg::max_abs;
    use crate::parser::{parse, pretty_print};
    use crate::program::{validate, Layout};
    use crate::semantics::{apply, denote_stmt, DensityMatrix};
    use crate::tol::EPS_SPEC;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn round_trips(p: &Program) {
        let layout = Layout::of(p);
        assert!(validate(p, &layout).is_valid());
        let text = pretty_print(p, &layout);
        let (reparsed, _) = parse(&text).expect("printed program must parse");
        assert_eq!(&reparsed, p, "round trip changed the program:\n{text}");
    }

    #[test]
    fn geo_builds_validates_and_round_trips() {
        round_trips(&build_geo());
    }

    #[test]
    fn qbf_builds_validates_and_round_trips() {
        for p in [0.0, 0.3, 1.0] {
            round_trips(&build_qbf(p).unwrap());
        }
        let prog = build_qbf(0.3).unwrap();
        let text = pretty_print(&prog, &Layout::of(&prog));
        assert_eq!(text.matches("while").count(), 1);
    }

    #[test]
    fn qbf_rejects_out_of_range_bias() {
        assert!(build_qbf(-0.1).is_err());
        assert!(build_qbf(1.5).is_err());
        assert!(build_qbf(f64::NAN).is_err());
    }

    #[test]
    fn walk_builds_validates_and_round_trips() {
        for n in [2, 5] {
            let spec = WalkSpec::new(n, CoinSpec::hadamard()).unwrap();
            round_trips(&build_walk(&spec));
        }
        let complex_coin =
            CoinSpec::new(c64(0.0, std::f64::consts::FRAC_1_SQRT_2), c64(0.6, 0.38)).unwrap_err();
        let _ = complex_coin; // not normalized: 0.5 + 0.36 + 0.1444
        assert!(WalkSpec::new(1, CoinSpec::hadamard()).is_err());
    }

    #[test]
    fn shift_moves_left_on_l_and_wraps_right() {
        let n = 5;
        let s = shift_matrix(n);
        // S|L,2⟩ = |L,1⟩
        assert_eq!(s.column(2)[1], Complex64::ONE);
        assert_eq!(s.column(2).iter().filter(|z| z.norm() > 0.5).count(), 1);
        // S|R,n−1⟩ = |R,0⟩
        assert_eq!(s.column(n + n - 1)[n], Complex64::ONE);
        // permutation ⇒ unitary
        assert!(max_abs_diff(&(&s * s.adjoint()), &CMatrix::identity(2 * n, 2 * n)) < 1e-14);
    }

    #[test]
    fn qbf_post_body_state_matches_hand_expansion() {
        for p in [0.3, 0.7] {
            let prog = build_qbf(p).unwrap();
            let layout = Layout::of(&prog);
            let Stmt::Seq(_, rest) = &prog.body else { panic!("expected seq") };
            // descend to the while statement at the tail of the chain
            let mut cur: &Stmt = rest;
            let body = loop {
                match cur {
                    Stmt::Seq(_, tail) => cur = tail,
                    Stmt::While { body, .. } => break body,
                    other => panic!("unexpected tail {other:?}"),
                }
            };
            let sup = denote_stmt(&prog, &layout, body, EPS_SPEC).unwrap();
            let rho_in = DensityMatrix::basis_state(4, 3).unwrap(); // |11⟩
            let rho_out = apply(&sup, &rho_in).unwrap();
            let s = std::f64::consts::FRAC_1_SQRT_2;
            let expect = DVector::from_row_slice(&[
                c64(s * (2.0 * p - 1.0), 0.0),
                c64(s, 0.0),
                c64((2.0 * p * (1.0 - p)).sqrt(), 0.0),
                c64(0.0, 0.0),
            ]);
            let expected_rho = &expect * expect.adjoint();
            assert!(
                max_abs_diff(rho_out.matrix(), &expected_rho) < 1e-10,
                "p = {p}"
            );
        }
    }

    #[test]
    fn qbf_runtime_observable_is_17_for_all_biases() {
        for p in [0.1, 0.5, 0.9] {
            let prog = build_qbf(p).unwrap();
            let layout = Layout::of(&prog);
            let ert = ert_observable(&prog, &layout).unwrap();
            let expect = CMatrix::identity(4, 4).scale(17.0);
            assert!(
                max_abs_diff(ert.matrix(), &expect) < 1e-8,
                "p = {p}: {:?}",
                ert.matrix()
            );
        }
    }

    #[test]
    fn walk_runtime_is_3n_minus_2_from_inner_left_state() {
        let n = 5;
        let spec = WalkSpec::new(n, CoinSpec::hadamard()).unwrap();
        let prog = build_walk(&spec);
        let layout = Layout::of(&prog);
        let rho = DensityMatrix::basis_state(2 * n, 1).unwrap(); // |L,1⟩
        let v = expected_runtime(&prog, &layout, &rho).unwrap();
        match v {
            ErtValue::Finite(x) => assert!((x - (3 * n - 2) as f64).abs() < 1e-8, "{x}"),
            ErtValue::Infinite => panic!("walk must terminate"),
        }
    }

    #[test]
    fn guard_count_observable_equals_qn() {
        let n = 5;
        let spec = WalkSpec::new(n, CoinSpec::hadamard()).unwrap();
        let prog = build_walk(&spec);
        let layout = Layout::of(&prog);
        let counts = loop_guard_count(&prog, &layout).unwrap();
        let qn = numeric_q(n, spec.coin()).unwrap();
        assert!(max_abs_diff(counts.matrix(), qn.matrix()) < 1e-7);
    }

    #[test]
    fn closed_form_matches_numeric_solve() {
        let coins = [CoinSpec::hadamard(), CoinSpec::real(0.6, 0.8).unwrap()];
        for coin in &coins {
            for n in [2, 3, 5, 7] {
                let c = closed_form_q(n, coin).unwrap();
                let s = numeric_q(n, coin).unwrap();
                assert!(
                    max_abs_diff(c.matrix(), s.matrix()) < 1e-8,
                    "n = {n}, coin = {coin:?}"
                );
            }
        }
    }

    #[test]
    fn balanced_coin_diagonal_is_the_circle_size() {
        for n in 3..=10 {
            let q = closed_form_q(n, &CoinSpec::hadamard()).unwrap();
            assert!((q.from_basis(true, 1) - n as f64).abs() < 1e-12);
            assert!((q.from_basis(true, 0) - 1.0).abs() < 1e-12);
        }
        let q3 = numeric_q(3, &CoinSpec::hadamard()).unwrap();
        for (k, want) in [(0usize, 1.0), (1, 3.0), (2, 3.0)] {
            assert!((q3.from_basis(true, k) - want).abs() < 1e-9);
        }
    }

    #[test]
    fn closed_form_requires_real_coin_with_nonzero_a() {
        let complex = CoinSpec::new(
            c64(0.0, std::f64::consts::FRAC_1_SQRT_2),
            c64(std::f64::consts::FRAC_1_SQRT_2, 0.0),
        )
        .unwrap();
        assert!(closed_form_q(4, &complex).is_err());
        let degenerate = CoinSpec::real(0.0, 1.0).unwrap();
        assert!(closed_form_q(4, &degenerate).is_err());
    }

    #[test]
    fn numeric_q_enforces_size_bounds() {
        assert!(numeric_q(1, &CoinSpec::hadamard()).is_err());
        assert!(numeric_q(MAX_NUMERIC_N + 1, &CoinSpec::hadamard()).is_err());
    }

    #[test]
    fn expected_steps_matches_quadratic_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for coin in [CoinSpec::hadamard(), CoinSpec::real(0.6, 0.8).unwrap()] {
            let n = 6;
            let spec = WalkSpec::new(n, coin.clone()).unwrap();
            let q = closed_form_q(n, &coin).unwrap();
            for _ in 0..8 {
                let mut v: Vec<Complex64> = (0..2 * n)
                    .map(|_| c64(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
                    .collect();
                let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                v.iter_mut().for_each(|z| *z = z.unscale(norm));
                let psi = DVector::from_row_slice(&v);
                let quad = (psi.adjoint() * q.matrix() * &psi)[(0, 0)].re;
                let series = expected_steps(&spec, &v[..n], &v[n..]).unwrap();
                assert!((quad - series).abs() < 1e-9, "{quad} vs {series}");
            }
        }
    }

    #[test]
    fn expected_steps_on_basis_states() {
        let n = 8;
        let spec = WalkSpec::new(n, CoinSpec::hadamard()).unwrap();
        let zero = vec![Complex64::ZERO; n];
        let mut alpha = zero.clone();
        alpha[1] = Complex64::ONE;
        let steps = expected_steps(&spec, &alpha, &zero).unwrap();
        assert!((steps - n as f64).abs() < 1e-12);

        // |R,k⟩ sees the mirrored diagonal entry.
        let n = 7;
        let spec = WalkSpec::new(n, CoinSpec::real(0.6, 0.8).unwrap()).unwrap();
        let fh = EntryFormulas::new(n, spec.coin()).unwrap();
        let k = 2;
        let m = (n - k) % n;
        let mut beta = vec![Complex64::ZERO; n];
        beta[k] = Complex64::ONE;
        let steps = expected_steps(&spec, &vec![Complex64::ZERO; n], &beta).unwrap();
        assert!((steps - (fh.f(m, m) + (m + 1) as f64)).abs() < 1e-12);
    }

    #[test]
    fn expected_steps_rejects_bad_amplitudes() {
        let spec = WalkSpec::new(4, CoinSpec::hadamard()).unwrap();
        let long = vec![Complex64::ONE; 5];
        assert!(expected_steps(&spec, &long, &long).is_err());
        let unnorm = vec![Complex64::ONE; 4];
        assert!(expected_steps(&spec, &unnorm, &unnorm).is_err());
    }

    #[test]
    fn phase_reduction_is_identity_for_nonnegative_real_coins() {
        let (real, p) = phase_reduction(5, &CoinSpec::hadamard());
        assert_eq!(real, CoinSpec::hadamard());
        assert!(max_abs_diff(&p, &CMatrix::identity(10, 10)) < 1e-14);
    }

    #[test]
    fn phase_reduction_conjugates_contraction_and_counts() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let coin = CoinSpec::new(c64(0.0, s), c64(s, 0.0)).unwrap();
        let n = 4;
        let (real, p) = phase_reduction(n, &coin);
        // P is diagonal-unitary
        assert!(max_abs_diff(&(&p * p.adjoint()), &CMatrix::identity(2 * n, 2 * n)) < 1e-12);

        let spec = WalkSpec::new(n, coin.clone()).unwrap();
        let spec_real = WalkSpec::new(n, real.clone()).unwrap();
        let e = walk_contraction(&spec);
        let e_real = walk_contraction(&spec_real);
        assert!(max_abs_diff(&e, &(p.adjoint() * &e_real * &p)) < 1e-10);

        let q = numeric_q(n, &coin).unwrap();
        let q_real = closed_form_q(n, &real).unwrap();
        let conjugated = p.adjoint() * q_real.matrix() * &p;
        assert!(max_abs_diff(q.matrix(), &conjugated) < 1e-8);
        // diagonal entries are phase-invariant
        for i in 0..2 * n {
            assert!((q.matrix()[(i, i)].re - q_real.matrix()[(i, i)].re).abs() < 1e-9);
        }
    }

    #[test]
    fn fixed_point_residual_separates_real_q_from_noise() {
        let coin = CoinSpec::hadamard();
        let spec = WalkSpec::new(6, coin.clone()).unwrap();
        let closed = closed_form_q(6, &coin).unwrap();
        assert!(verify_fixed_point(&closed, &spec).unwrap() < 1e-9);
        let numeric = numeric_q(6, &coin).unwrap();
        assert!(verify_fixed_point(&numeric, &spec).unwrap() < 1e-8);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let raw = CMatrix::from_fn(12, 12, |_, _| {
            c64(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let junk = QnMatrix { n: 6, q: (&raw + raw.adjoint()).unscale(2.0) };
        assert!(verify_fixed_point(&junk, &spec).unwrap() > 0.5);

        let mismatched = WalkSpec::new(5, coin).unwrap();
        assert!(verify_fixed_point(&closed, &mismatched).is_err());
    }

    #[test]
    fn balanced_coin_recurrences_hold_in_exact_dyadic_arithmetic() {
        // With a = b = 1/√2 the ratios b/a and (b/a)² are exactly 1, every
        // closed-form entry is an exact small integer, and a², b², ab are
        // exactly 1/2 — all dyadic, so the recurrences admit zero rounding.
        for n in [4, 5, 8] {
            let q = closed_form_q(n, &CoinSpec::hadamard()).unwrap();
            for entry in q.matrix().iter() {
                assert_eq!(entry.im, 0.0);
                assert_eq!(entry.re, entry.re.round());
            }
            let residual = recurrence_residual(q.matrix(), n, 0.5, 0.5, 0.5);
            assert_eq!(residual, 0.0, "n = {n}");
        }
    }

    #[test]
    fn contraction_matches_guard_count_transfer() {
        // E is precisely the operator whose doubled form E⊗E* drives the
        // guard-count series; spot-check the defining product structure.
        let n = 4;
        let spec = WalkSpec::new(n, CoinSpec::hadamard()).unwrap();
        let e = walk_contraction(&spec);
        let t_full = kron(&spec.coin().matrix(), &CMatrix::identity(n, n));
        let s = shift_matrix(n);
        let mut m1 = CMatrix::identity(2 * n, 2 * n);
        m1[(0, 0)] = Complex64::ZERO;
        m1[(n, n)] = Complex64::ZERO;
        // one surviving iteration reads: pass the guard, flip the coin,
        // shift — and E is the adjoint of that composite
        assert!(max_abs_diff(&e, &(&s * &t_full * &m1).adjoint()) < 1e-14);
        assert!(max_abs(&e) > 0.1);
    }
}
