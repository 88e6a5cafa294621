//! Dense complex linear algebra helpers on top of nalgebra: numerical rank,
//! conditioned solves, least squares and eigenvectors from a Schur form.

use nalgebra::{DMatrix, DVector};

use crate::algebra::{Scalar, ONE, ZERO};
use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Scalar>;
pub type CVector = DVector<Scalar>;

/// Singular values in decreasing order.
pub fn singular_values(a: &CMatrix) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = a.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Number of singular values above `tol · σ_max`.
pub fn numerical_rank(a: &CMatrix, tol: f64) -> usize {
    rank_of(&singular_values(a), tol)
}

pub(crate) fn rank_of(s: &[f64], tol: f64) -> usize {
    match s.first() {
        Some(&max) if max > 0.0 => s.iter().filter(|&&x| x > tol * max).count(),
        _ => 0,
    }
}

/// `σ_max / σ_min` of a square matrix (infinite when singular).
pub fn condition_number(a: &CMatrix) -> f64 {
    let s = singular_values(a);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

/// Solves `a x = b` for square, well-conditioned `a`.
pub fn solve(a: &CMatrix, b: &CMatrix, max_cond: f64) -> Result<CMatrix> {
    assert_eq!(a.nrows(), a.ncols(), "solve expects a square matrix");
    let cond = condition_number(a);
    if !(cond <= max_cond) {
        return Err(Error::Singular(cond));
    }
    a.clone().lu().solve(b).ok_or(Error::Singular(cond))
}

/// Minimum-norm least-squares solution of `a x = b`, discarding singular
/// values below `tol · σ_max`. Returns the solution and the relative
/// residual `‖a x − b‖ / max(‖b‖, tiny)`.
pub fn lstsq(a: &CMatrix, b: &CMatrix, tol: f64) -> (CMatrix, f64) {
    if a.nrows() == 0 || a.ncols() == 0 {
        return (CMatrix::zeros(a.ncols(), b.ncols()), 0.0);
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let x = svd
        .solve(b, (tol * smax).max(f64::MIN_POSITIVE))
        .unwrap_or_else(|_| CMatrix::zeros(a.ncols(), b.ncols()));
    let r = a * &x - b;
    let denom = b.norm().max(1e-300);
    (x, r.norm() / denom)
}

/// Orthonormal basis of the right null space (columns), using the
/// threshold `tol · σ_max`.
pub fn null_space(a: &CMatrix, tol: f64) -> CMatrix {
    let n = a.ncols();
    if a.nrows() == 0 {
        return CMatrix::identity(n, n);
    }
    // pad to at least n rows so that the SVD exposes all right vectors
    let padded = if a.nrows() < n {
        let mut p = CMatrix::zeros(n, n);
        p.view_mut((0, 0), (a.nrows(), n)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let s = &svd.singular_values;
    let smax = s.max();
    let keep: Vec<usize> = (0..s.len())
        .filter(|&i| smax <= 0.0 || s[i] <= tol * smax)
        .collect();
    let mut out = CMatrix::zeros(n, keep.len());
    for (j, &i) in keep.iter().enumerate() {
        for r in 0..n {
            out[(r, j)] = v_t[(i, r)].conj();
        }
    }
    out
}

pub fn to_complex(a: &DMatrix<f64>) -> CMatrix {
    a.map(|x| Scalar::new(x, 0.0))
}

/// Largest absolute imaginary part relative to the largest modulus.
pub fn imag_ratio(values: impl IntoIterator<Item = Scalar>) -> f64 {
    let (mut im, mut scale) = (0.0f64, 0.0f64);
    for v in values {
        im = im.max(v.im.abs());
        scale = scale.max(v.norm());
    }
    if scale == 0.0 {
        0.0
    } else {
        im / scale
    }
}

/// Eigenvalues and (unit-norm) eigenvectors of a general complex matrix.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<Scalar>,
    /// Eigenvectors as columns, matching `values`.
    pub vectors: CMatrix,
}

/// Eigendecomposition through the complex Schur form `A = Q T Qᴴ`, with
/// eigenvectors of `T` obtained by back substitution.
pub fn eigen(a: &CMatrix) -> Eigen {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "eigen expects a square matrix");
    if n == 0 {
        return Eigen {
            values: Vec::new(),
            vectors: CMatrix::zeros(0, 0),
        };
    }
    let (q, t) = a.clone().schur().unpack();
    let values: Vec<Scalar> = (0..n).map(|i| t[(i, i)]).collect();
    let small = f64::EPSILON * t.norm().max(1.0);
    let mut vectors = CMatrix::zeros(n, n);
    for k in 0..n {
        let lambda = values[k];
        let mut y = CVector::zeros(n);
        y[k] = ONE;
        for j in (0..k).rev() {
            let mut acc = ZERO;
            for l in j + 1..=k {
                acc += t[(j, l)] * y[l];
            }
            let mut d = t[(j, j)] - lambda;
            if d.norm() < small {
                d = Scalar::new(small, 0.0);
            }
            y[j] = -acc / d;
        }
        let mut v = &q * y;
        let nv = v.norm();
        if nv > 0.0 {
            v /= Scalar::new(nv, 0.0);
        }
        vectors.set_column(k, &v);
    }
    Eigen { values, vectors }
}
