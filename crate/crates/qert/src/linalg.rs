//! Dense complex linear algebra: vectorization, Kronecker products, operator
//! embedding, and Hermitian eigensystems.
//!
//! ## Conventions
//!
//! Vectorization is **row-major** and normative for the whole crate:
//! `vec(A)[i·d + j] = A[i,j]`, equivalently `vec(A) = (A ⊗ I)|Ψ⟩` with
//! `|Ψ⟩ = Σ_j |jj⟩`. Under this convention `vec(X·A·Y) = (X ⊗ Yᵀ)·vec(A)`,
//! which is what makes the transfer-matrix representation in
//! [`crate::channel`] work. Composite spaces index row-major over the
//! variable list: earlier variables are the more significant digits.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tol;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Shorthand complex constructor.
#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Largest entry modulus; zero for empty matrices.
pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

/// Largest entry modulus of `a - b`.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape(), "shape mismatch in max_abs_diff");
    let mut m = 0.0f64;
    for (x, y) in a.iter().zip(b.iter()) {
        m = m.max((x - y).norm());
    }
    m
}

/// Hermiticity defect `‖A − A†‖_max`.
pub fn hermiticity_defect(a: &CMatrix) -> f64 {
    let mut m = 0.0f64;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            m = m.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    m
}

/// Row-major flattening of a square matrix.
pub fn vec(a: &CMatrix) -> Result<CVector> {
    if a.nrows() != a.ncols() {
        return Err(Error::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    let d = a.nrows();
    let mut v = CVector::zeros(d * d);
    for i in 0..d {
        for j in 0..d {
            v[i * d + j] = a[(i, j)];
        }
    }
    Ok(v)
}

/// Inverse of [`vec`]: reshapes a length-d² vector into a d×d matrix.
pub fn unvec(v: &CVector, d: usize) -> Result<CMatrix> {
    if v.len() != d * d {
        return Err(Error::Dimension {
            context: "unvec",
            expected: d * d,
            found: v.len(),
        });
    }
    let mut a = CMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            a[(i, j)] = v[i * d + j];
        }
    }
    Ok(a)
}

/// Kronecker product, index-compatible with row-major [`vec`]:
/// `(A⊗B)[(i₁·rB+i₂),(j₁·cB+j₂)] = A[i₁,j₁]·B[i₂,j₂]`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ra, ca) = a.shape();
    let (rb, cb) = b.shape();
    let mut out = CMatrix::zeros(ra * rb, ca * cb);
    for i1 in 0..ra {
        for j1 in 0..ca {
            let s = a[(i1, j1)];
            if s == Complex64::ZERO {
                continue;
            }
            for i2 in 0..rb {
                for j2 in 0..cb {
                    out[(i1 * rb + i2, j1 * cb + j2)] = s * b[(i2, j2)];
                }
            }
        }
    }
    out
}

/// Lifts `a` (acting on the listed target factors, in target order) to the
/// full space described by `dims`, identity on the remaining factors.
///
/// `targets` are distinct indices into `dims`; the full-space basis is
/// row-major over `dims`. Conceptually: permute targets to the front, apply
/// `a ⊗ I_rest`, permute back.
pub fn embed(a: &CMatrix, targets: &[usize], dims: &[usize]) -> Result<CMatrix> {
    if a.nrows() != a.ncols() {
        return Err(Error::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    let mut seen = std::collections::HashSet::new();
    for &t in targets {
        if t >= dims.len() {
            return Err(Error::invalid(format!(
                "embed: target index {t} out of range for {} factors",
                dims.len()
            )));
        }
        if !seen.insert(t) {
            return Err(Error::invalid("embed: duplicate target factor"));
        }
    }
    let d_t: usize = targets.iter().map(|&t| dims[t]).product();
    if a.nrows() != d_t {
        return Err(Error::Dimension {
            context: "embed: operator vs target dims",
            expected: d_t,
            found: a.nrows(),
        });
    }
    let d: usize = dims.iter().product();
    let rest: Vec<usize> = (0..dims.len()).filter(|k| !targets.contains(k)).collect();

    // For each full-space index precompute its (target-subindex, rest-subindex).
    let mut strides = vec![1usize; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * dims[k + 1];
    }
    let coord = |x: usize, k: usize| (x / strides[k]) % dims[k];
    let mut tpart = vec![0usize; d];
    let mut rpart = vec![0usize; d];
    for x in 0..d {
        let mut t = 0usize;
        for &k in targets {
            t = t * dims[k] + coord(x, k);
        }
        let mut r = 0usize;
        for &k in &rest {
            r = r * dims[k] + coord(x, k);
        }
        tpart[x] = t;
        rpart[x] = r;
    }

    let mut out = CMatrix::zeros(d, d);
    for x in 0..d {
        for y in 0..d {
            if rpart[x] == rpart[y] {
                out[(x, y)] = a[(tpart[x], tpart[y])];
            }
        }
    }
    Ok(out)
}

/// Eigensystem of a Hermitian matrix: eigenvalues ascending, eigenvectors as
/// the corresponding orthonormal columns.
pub fn hermitian_eigensystem(a: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let defect = hermiticity_defect(a);
    if defect > tol::TOL_HERMITIAN {
        return Err(Error::NotHermitian { residual: defect });
    }
    let d = a.nrows();
    // Symmetrize first so the eigensolver sees an exactly Hermitian input.
    let h = (a + a.adjoint()).scale(0.5);
    let se = nalgebra::SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| se.eigenvalues[i].total_cmp(&se.eigenvalues[j]));
    let values: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(d, d);
    for (col, &i) in order.iter().enumerate() {
        vectors.set_column(col, &se.eigenvectors.column(i));
    }
    Ok((values, vectors))
}

// ========== Matrix JSON ==========

/// Interchange form for complex matrices: row-major entries as `[re, im]`
/// pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<[f64; 2]>,
}

impl MatrixJson {
    pub fn from_matrix(a: &CMatrix) -> Self {
        let mut data = Vec::with_capacity(a.nrows() * a.ncols());
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                let z = a[(i, j)];
                data.push([z.re, z.im]);
            }
        }
        MatrixJson {
            rows: a.nrows(),
            cols: a.ncols(),
            data,
        }
    }

    pub fn to_matrix(&self) -> Result<CMatrix> {
        if self.data.len() != self.rows * self.cols {
            return Err(Error::Dimension {
                context: "matrix JSON data length",
                expected: self.rows * self.cols,
                found: self.data.len(),
            });
        }
        let mut a = CMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let [re, im] = self.data[i * self.cols + j];
                a[(i, j)] = c64(re, im);
            }
        }
        Ok(a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub fn random_cmatrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMatrix {
        CMatrix::from_fn(r, c, |_, _| {
            c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    #[test]
    fn vec_identity() {
        let v = vec(&CMatrix::identity(2, 2)).unwrap();
        assert_eq!(v.as_slice(), &[c64(1.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0), c64(1.0, 0.0)]);
    }

    #[test]
    fn vec_is_row_major() {
        let a = CMatrix::from_row_slice(2, 2, &[c64(1.0, 0.0), c64(2.0, 0.0), c64(3.0, 0.0), c64(4.0, 0.0)]);
        let v = vec(&a).unwrap();
        assert_eq!(v[1], c64(2.0, 0.0));
        assert_eq!(v[2], c64(3.0, 0.0));
    }

    #[test]
    fn vec_unvec_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for d in [1, 2, 3, 5] {
            let a = random_cmatrix(&mut rng, d, d);
            let back = unvec(&vec(&a).unwrap(), d).unwrap();
            assert_eq!(max_abs_diff(&a, &back), 0.0);
        }
    }

    #[test]
    fn vec_rejects_non_square() {
        assert!(vec(&CMatrix::zeros(2, 3)).is_err());
        assert!(unvec(&CVector::zeros(5), 2).is_err());
    }

    #[test]
    fn unvec_zero() {
        let z = unvec(&CVector::zeros(9), 3).unwrap();
        assert_eq!(max_abs(&z), 0.0);
    }

    #[test]
    fn kron_identities() {
        let i2 = CMatrix::identity(2, 2);
        assert_eq!(max_abs_diff(&kron(&i2, &i2), &CMatrix::identity(4, 4)), 0.0);
    }

    #[test]
    fn kron_hand_expansion() {
        // |0⟩⟨0| ⊗ X places X in the top-left block.
        let p0 = CMatrix::from_row_slice(2, 2, &[c64(1.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0)]);
        let x = CMatrix::from_row_slice(2, 2, &[c64(0.0, 0.0), c64(1.0, 0.0), c64(1.0, 0.0), c64(0.0, 0.0)]);
        let k = kron(&p0, &x);
        let mut expect = CMatrix::zeros(4, 4);
        expect[(0, 1)] = c64(1.0, 0.0);
        expect[(1, 0)] = c64(1.0, 0.0);
        assert_eq!(max_abs_diff(&k, &expect), 0.0);
    }

    #[test]
    fn kron_mixed_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let a = random_cmatrix(&mut rng, 2, 2);
            let b = random_cmatrix(&mut rng, 2, 2);
            let c = random_cmatrix(&mut rng, 2, 2);
            let d = random_cmatrix(&mut rng, 2, 2);
            let lhs = kron(&a, &b) * kron(&c, &d);
            let rhs = kron(&(&a * &c), &(&b * &d));
            assert!(max_abs_diff(&lhs, &rhs) < 1e-12);
        }
    }

    #[test]
    fn vec_of_product_is_kron_action() {
        // vec(X A Y) = (X ⊗ Yᵀ) vec(A): the identity the whole crate rests on.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let x = random_cmatrix(&mut rng, 3, 3);
            let a = random_cmatrix(&mut rng, 3, 3);
            let y = random_cmatrix(&mut rng, 3, 3);
            let lhs = vec(&(&x * &a * &y)).unwrap();
            let rhs = kron(&x, &y.transpose()) * vec(&a).unwrap();
            assert!((lhs - rhs).norm() < 1e-12);
        }
    }

    #[test]
    fn embed_whole_space_is_identity_lift() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_cmatrix(&mut rng, 2, 2);
        assert_eq!(max_abs_diff(&embed(&a, &[0], &[2]).unwrap(), &a), 0.0);
    }

    #[test]
    fn embed_second_factor() {
        let x = CMatrix::from_row_slice(2, 2, &[c64(0.0, 0.0), c64(1.0, 0.0), c64(1.0, 0.0), c64(0.0, 0.0)]);
        let i2 = CMatrix::identity(2, 2);
        let e = embed(&x, &[1], &[2, 2]).unwrap();
        assert_eq!(max_abs_diff(&e, &kron(&i2, &x)), 0.0);
    }

    #[test]
    fn embed_respects_target_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = random_cmatrix(&mut rng, 2, 2);
        let q = random_cmatrix(&mut rng, 3, 3);
        let pq = kron(&p, &q);
        assert!(max_abs_diff(&embed(&pq, &[0, 1], &[2, 3]).unwrap(), &pq) < 1e-15);
        // Swapped targets: operator written on (factor1, factor0).
        let qp = kron(&q, &p);
        assert!(max_abs_diff(&embed(&qp, &[1, 0], &[2, 3]).unwrap(), &pq) < 1e-15);
    }

    #[test]
    fn embed_middle_of_three() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = random_cmatrix(&mut rng, 3, 3);
        let e = embed(&a, &[1], &[2, 3, 2]).unwrap();
        let expect = kron(&kron(&CMatrix::identity(2, 2), &a), &CMatrix::identity(2, 2));
        assert!(max_abs_diff(&e, &expect) < 1e-15);
    }

    #[test]
    fn embed_rejects_bad_input() {
        let a = CMatrix::identity(2, 2);
        assert!(embed(&a, &[0, 0], &[2, 2]).is_err());
        assert!(embed(&a, &[3], &[2, 2]).is_err());
        assert!(embed(&a, &[0], &[3]).is_err());
    }

    #[test]
    fn hermitian_eigensystem_diagonal() {
        let a = CMatrix::from_row_slice(2, 2, &[c64(2.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0), c64(1.0, 0.0)]);
        let (vals, _) = hermitian_eigensystem(&a).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-12 && (vals[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn hermitian_eigensystem_pauli_x() {
        let x = CMatrix::from_row_slice(2, 2, &[c64(0.0, 0.0), c64(1.0, 0.0), c64(1.0, 0.0), c64(0.0, 0.0)]);
        let (vals, vecs) = hermitian_eigensystem(&x).unwrap();
        assert!((vals[0] + 1.0).abs() < 1e-12 && (vals[1] - 1.0).abs() < 1e-12);
        let d = CMatrix::from_diagonal(&CVector::from_iterator(2, vals.iter().map(|&v| c64(v, 0.0))));
        assert!(max_abs_diff(&(&vecs * d * vecs.adjoint()), &x) < 1e-9);
    }

    #[test]
    fn hermitian_eigensystem_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for d in [2, 4, 7] {
            let g = random_cmatrix(&mut rng, d, d);
            let h = (&g + g.adjoint()).scale(0.5);
            let (vals, vecs) = hermitian_eigensystem(&h).unwrap();
            let dm = CMatrix::from_diagonal(&CVector::from_iterator(d, vals.iter().map(|&v| c64(v, 0.0))));
            assert!(max_abs_diff(&(&vecs * dm * vecs.adjoint()), &h) < 1e-9);
            assert!(max_abs_diff(&(vecs.adjoint() * &vecs), &CMatrix::identity(d, d)) < 1e-9);
            for w in vals.windows(2) {
                assert!(w[0] <= w[1]);
            }
        }
    }

    #[test]
    fn hermitian_eigensystem_rejects_non_hermitian() {
        let a = CMatrix::from_row_slice(2, 2, &[c64(0.0, 0.0), c64(1.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0)]);
        assert!(matches!(hermitian_eigensystem(&a), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn matrix_json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = random_cmatrix(&mut rng, 3, 4);
        let j = MatrixJson::from_matrix(&a);
        let s = serde_json::to_string(&j).unwrap();
        let back: MatrixJson = serde_json::from_str(&s).unwrap();
        assert_eq!(max_abs_diff(&back.to_matrix().unwrap(), &a), 0.0);
    }

    #[test]
    fn matrix_json_rejects_bad_length() {
        let j = MatrixJson {
            rows: 2,
            cols: 2,
            data: vec![[0.0, 0.0]; 3],
        };
        assert!(j.to_matrix().is_err());
    }
}
