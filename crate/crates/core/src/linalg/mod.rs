//! Dense linear-algebra kernels shared by the embedding, regression and simulation code.
//!
//! Matrices are plain [`ndarray::Array2<f64>`]. Decompositions (symmetric eigen, thin SVD,
//! QR) are delegated to `faer`; everything built on top of them lives here.

mod rotation;
mod svd;

use faer::{Mat, MatRef};
use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub use rotation::{procrustes, random_orthogonal, varimax, varimax_criterion, Varimax};
pub(crate) use svd::{dense_top_eigen, orient_columns};
pub use svd::{symmetric_top_eigen, truncated_svd, TruncatedSvd};

/// Default relative cutoff for [`pinv`].
pub const PINV_RTOL: f64 = 1e-12;

pub(crate) fn to_faer(a: ArrayView2<'_, f64>) -> Mat<f64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

pub(crate) fn from_faer(m: MatRef<'_, f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Rejects empty matrices and non-finite entries.
pub fn ensure_finite(a: ArrayView2<'_, f64>, what: &str) -> Result<()> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(Error::Input(format!(
            "{what} has an empty dimension ({}x{})",
            a.nrows(),
            a.ncols()
        )));
    }
    if let Some(((i, j), v)) = a.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::Input(format!("{what} has non-finite entry {v} at ({i}, {j})")));
    }
    Ok(())
}

pub fn is_symmetric(a: ArrayView2<'_, f64>, tol: f64) -> bool {
    let n = a.nrows();
    if n != a.ncols() {
        return false;
    }
    (0..n).all(|i| (i + 1..n).all(|j| (a[[i, j]] - a[[j, i]]).abs() <= tol))
}

pub fn max_abs_diff(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> f64 {
    assert_eq!(a.dim(), b.dim());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn frobenius(a: ArrayView2<'_, f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Largest row Euclidean norm (the two-to-infinity norm).
pub fn two_to_infinity(a: ArrayView2<'_, f64>) -> f64 {
    a.rows().into_iter().map(|r| r.dot(&r).sqrt()).fold(0.0, f64::max)
}

/// Kronecker product: `(A⊗B)[i·p+k, j·q+l] = A[i,j]·B[k,l]` for `B` of shape `p×q`.
pub fn kron(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Array2<f64> {
    let (m, n) = a.dim();
    let (p, q) = b.dim();
    let mut out = Array2::zeros((m * p, n * q));
    for i in 0..m {
        for j in 0..n {
            let aij = a[[i, j]];
            if aij == 0.0 {
                continue;
            }
            let mut block = out.slice_mut(ndarray::s![i * p..(i + 1) * p, j * q..(j + 1) * q]);
            block.zip_mut_with(&b, |o, &bkl| *o = aij * bkl);
        }
    }
    out
}

/// Moore–Penrose pseudo-inverse. Singular values below `rtol · σ_max` are treated as zero;
/// pass [`PINV_RTOL`] for the usual cutoff.
pub fn pinv(a: ArrayView2<'_, f64>, rtol: f64) -> Result<Array2<f64>> {
    ensure_finite(a, "pinv input")?;
    let svd = to_faer(a)
        .thin_svd()
        .map_err(|e| Error::Numerical(format!("svd did not converge: {e:?}")))?;
    let s = svd.S().column_vector();
    let k = s.nrows();
    let smax = (0..k).map(|i| s[i]).fold(0.0, f64::max);
    let cutoff = rtol * smax;
    let u = svd.U();
    let v = svd.V();
    let mut out = Array2::zeros((a.ncols(), a.nrows()));
    for r in 0..k {
        let sr = s[r];
        if sr <= cutoff || sr == 0.0 {
            continue;
        }
        let inv = 1.0 / sr;
        for i in 0..a.ncols() {
            let vi = v[(i, r)] * inv;
            for j in 0..a.nrows() {
                out[[i, j]] += vi * u[(j, r)];
            }
        }
    }
    Ok(out)
}

/// Inverse of a small symmetric positive-definite matrix via its eigendecomposition.
/// Fails if the condition number exceeds `1 / rtol`.
#[cfg(test)]
pub(crate) fn spd_inverse(a: ArrayView2<'_, f64>, rtol: f64) -> Result<Array2<f64>> {
    let evd = to_faer(a)
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::Numerical(format!("eigendecomposition failed: {e:?}")))?;
    let s = evd.S().column_vector();
    let n = a.nrows();
    let smax = (0..n).map(|i| s[i].abs()).fold(0.0, f64::max);
    if (0..n).any(|i| s[i] <= rtol * smax) || smax == 0.0 {
        return Err(Error::Rank("matrix is numerically singular".into()));
    }
    let u = from_faer(evd.U());
    let inv_s = ndarray::Array1::from_shape_fn(n, |i| 1.0 / s[i]);
    Ok((&u * &inv_s).dot(&u.t()))
}

/// Orthonormal basis for the column space of `a` (thin Householder QR).
pub(crate) fn orthonormalize(a: ArrayView2<'_, f64>) -> Array2<f64> {
    let q = to_faer(a).qr().compute_thin_Q();
    from_faer(q.as_ref())
}

pub(crate) fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.sample(StandardNormal))
}
