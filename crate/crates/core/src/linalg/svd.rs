use ndarray::{s, Array1, Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ensure_finite, from_faer, gaussian_matrix, is_symmetric, orthonormalize, to_faer};
use crate::error::{Error, Result};

/// Rank-`d` truncated singular value decomposition `A ≈ U diag(S) Vᵀ`.
///
/// Singular values are nonincreasing. Each column pair `(u_j, v_j)` is oriented so the
/// largest-magnitude entry of `u_j` is nonnegative (first such entry on ties).
#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    pub u: Array2<f64>,
    pub s: Array1<f64>,
    pub v: Array2<f64>,
}

impl TruncatedSvd {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    pub fn reconstruct(&self) -> Array2<f64> {
        (&self.u * &self.s).dot(&self.v.t())
    }

    /// Keeps the leading `d` triplets.
    pub fn truncate(&self, d: usize) -> TruncatedSvd {
        assert!(d <= self.rank());
        TruncatedSvd {
            u: self.u.slice(s![.., ..d]).to_owned(),
            s: self.s.slice(s![..d]).to_owned(),
            v: self.v.slice(s![.., ..d]).to_owned(),
        }
    }
}

// Subspace iteration is only attempted where it can beat a dense decomposition.
const FAST_PATH_MIN_N: usize = 256;
const SUBSPACE_MAX_ITER: usize = 40;
const SUBSPACE_RTOL: f64 = 1e-11;

pub fn truncated_svd(a: ArrayView2<'_, f64>, d: usize) -> Result<TruncatedSvd> {
    ensure_finite(a, "matrix")?;
    let (rows, cols) = a.dim();
    let max_rank = rows.min(cols);
    if d == 0 || d > max_rank {
        return Err(Error::Dimension(format!(
            "rank {d} outside 1..={max_rank} for a {rows}x{cols} matrix"
        )));
    }

    let mut out = if is_symmetric(a, 0.0) {
        let (vals, vecs) = symmetric_top_eigen(a, d)?;
        let s = vals.mapv(f64::abs);
        let signs = vals.mapv(|l| if l < 0.0 { -1.0 } else { 1.0 });
        let v = &vecs * &signs;
        TruncatedSvd { u: vecs, s, v }
    } else {
        let svd = to_faer(a)
            .thin_svd()
            .map_err(|e| Error::Numerical(format!("svd did not converge: {e:?}")))?;
        let sv = svd.S().column_vector();
        TruncatedSvd {
            u: from_faer(svd.U()).slice(s![.., ..d]).to_owned(),
            s: Array1::from_shape_fn(d, |i| sv[i].max(0.0)),
            v: from_faer(svd.V()).slice(s![.., ..d]).to_owned(),
        }
    };
    orient_columns(&mut out.u, &mut out.v);
    Ok(out)
}

/// The `d` eigenpairs of a symmetric matrix with largest |λ|, ordered by decreasing |λ|.
///
/// Large inputs try a seeded block subspace iteration with Rayleigh–Ritz extraction first and
/// fall back to a dense decomposition if the Ritz residuals do not converge.
pub fn symmetric_top_eigen(a: ArrayView2<'_, f64>, d: usize) -> Result<(Array1<f64>, Array2<f64>)> {
    let n = a.nrows();
    if n != a.ncols() || d == 0 || d > n {
        return Err(Error::Dimension(format!(
            "cannot take {d} eigenpairs of a {}x{} matrix",
            n,
            a.ncols()
        )));
    }
    let block = block_size(d);
    if n >= FAST_PATH_MIN_N && block * 4 <= n {
        if let Some(found) = subspace_iteration(a, d, block) {
            return Ok(found);
        }
        log::debug!("subspace iteration did not converge for n={n}, d={d}; using dense solver");
    }
    dense_top_eigen(a, d)
}

fn block_size(d: usize) -> usize {
    2 * d + 8
}

pub(crate) fn dense_top_eigen(a: ArrayView2<'_, f64>, d: usize) -> Result<(Array1<f64>, Array2<f64>)> {
    let evd = to_faer(a)
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::Numerical(format!("eigendecomposition failed: {e:?}")))?;
    let sv = evd.S().column_vector();
    let n = a.nrows();
    let vals: Vec<f64> = (0..n).map(|i| sv[i]).collect();
    let order = magnitude_order(&vals);
    let u = evd.U();
    let values = Array1::from_shape_fn(d, |j| vals[order[j]]);
    let vectors = Array2::from_shape_fn((n, d), |(i, j)| u[(i, order[j])]);
    Ok((values, vectors))
}

/// Indices sorted by decreasing |value|; ties keep the larger signed value first.
fn magnitude_order(vals: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..vals.len()).collect();
    idx.sort_by(|&i, &j| {
        vals[j]
            .abs()
            .total_cmp(&vals[i].abs())
            .then(vals[j].total_cmp(&vals[i]))
    });
    idx
}

fn subspace_iteration(a: ArrayView2<'_, f64>, d: usize, block: usize) -> Option<(Array1<f64>, Array2<f64>)> {
    let n = a.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(0x0a5e_5eed);
    let start = gaussian_matrix(n, block, &mut rng);
    let mut q = orthonormalize(a.dot(&start).view());

    for _ in 0..SUBSPACE_MAX_ITER {
        let z = a.dot(&q);
        let mut h = q.t().dot(&z);
        let ht = h.t().to_owned();
        h = (h + ht) * 0.5;
        let (vals, vecs) = dense_top_eigen(h.view(), block).ok()?;
        let ritz = q.dot(&vecs);
        let a_ritz = z.dot(&vecs);

        let scale = vals[0].abs();
        let converged = (0..d).all(|j| {
            let r = &a_ritz.column(j) - &(&ritz.column(j) * vals[j]);
            r.dot(&r).sqrt() <= SUBSPACE_RTOL * scale
        });
        if converged {
            let values = vals.slice(s![..d]).to_owned();
            let vectors = ritz.slice(s![.., ..d]).to_owned();
            return Some((values, vectors));
        }
        q = orthonormalize(a_ritz.view());
    }
    None
}

pub(crate) fn orient_columns(u: &mut Array2<f64>, v: &mut Array2<f64>) {
    for j in 0..u.ncols() {
        let col = u.column(j);
        let mut best = 0;
        for i in 1..col.len() {
            if col[i].abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            u.column_mut(j).mapv_inplace(|x| -x);
            v.column_mut(j).mapv_inplace(|x| -x);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{frobenius, max_abs_diff, random_orthogonal};
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn orthonormality_error(m: &Array2<f64>) -> f64 {
        let g = m.t().dot(m);
        max_abs_diff(g.view(), Array2::eye(m.ncols()).view())
    }

    #[test]
    fn rank_one_diagonal() {
        let a = array![[1.0, 0.0], [0.0, 0.0]];
        let t = truncated_svd(a.view(), 1).unwrap();
        assert_abs_diff_eq!(t.s[0], 1.0, epsilon = 1e-14);
        let x = &t.u * &t.s.mapv(f64::sqrt);
        assert_abs_diff_eq!(x, array![[1.0], [0.0]], epsilon = 1e-14);
    }

    #[test]
    fn identity_has_unit_singular_values() {
        let t = truncated_svd(Array2::<f64>::eye(3).view(), 3).unwrap();
        assert_abs_diff_eq!(t.s, array![1.0, 1.0, 1.0], epsilon = 1e-14);
        assert!(orthonormality_error(&t.u) < 1e-12);
        assert!(orthonormality_error(&t.v) < 1e-12);
    }

    #[test]
    fn low_rank_psd_reconstructs_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = gaussian_matrix(6, 2, &mut rng);
        let a = x.dot(&x.t());
        let t = truncated_svd(a.view(), 2).unwrap();
        assert!(frobenius((&a - &t.reconstruct()).view()) <= 1e-8);
    }

    #[test]
    fn rectangular_matches_svd_of_known_factors() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let l = gaussian_matrix(7, 3, &mut rng);
        let r = gaussian_matrix(4, 3, &mut rng);
        let a = l.dot(&r.t());
        let t = truncated_svd(a.view(), 3).unwrap();
        assert!(frobenius((&a - &t.reconstruct()).view()) <= 1e-10);
        assert!(orthonormality_error(&t.u) < 1e-10);
        assert!(orthonormality_error(&t.v) < 1e-10);
        assert!(t.s[0] >= t.s[1] && t.s[1] >= t.s[2]);
    }

    #[test]
    fn negative_eigenvalues_give_flipped_right_vectors() {
        let a = array![[0.0, 2.0], [2.0, 0.0]];
        let t = truncated_svd(a.view(), 2).unwrap();
        assert_abs_diff_eq!(t.s, array![2.0, 2.0], epsilon = 1e-14);
        assert_abs_diff_eq!(t.reconstruct(), a, epsilon = 1e-13);
    }

    #[test]
    fn rank_out_of_range_is_dimension_error() {
        let a = Array2::<f64>::eye(3);
        assert!(matches!(truncated_svd(a.view(), 0), Err(Error::Dimension(_))));
        assert!(matches!(truncated_svd(a.view(), 4), Err(Error::Dimension(_))));
    }

    #[test]
    fn non_finite_is_input_error() {
        let a = array![[1.0, f64::INFINITY], [0.0, 1.0]];
        assert!(matches!(truncated_svd(a.view(), 1), Err(Error::Input(_))));
    }

    #[test]
    fn sign_convention_makes_dominant_entry_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let a = gaussian_matrix(8, 5, &mut rng);
        let t = truncated_svd(a.view(), 4).unwrap();
        for col in t.u.columns() {
            let m = col
                .iter()
                .cloned()
                .fold(0.0f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
            assert!(m >= 0.0);
        }
    }

    #[test]
    fn subspace_iteration_agrees_with_dense_route() {
        let n = 400;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let x = gaussian_matrix(n, 3, &mut rng) * 2.0;
        let noise = gaussian_matrix(n, n, &mut rng) * 0.1;
        let a = x.dot(&x.t()) + &noise + noise.t();
        let (fast_vals, fast_vecs) =
            subspace_iteration(a.view(), 3, block_size(3)).expect("converges with a clear gap");
        let (dense_vals, dense_vecs) = dense_top_eigen(a.view(), 3).unwrap();
        for j in 0..3 {
            assert!((fast_vals[j] - dense_vals[j]).abs() <= 1e-8 * dense_vals[j].abs());
            let overlap = fast_vecs.column(j).dot(&dense_vecs.column(j)).abs();
            assert!((overlap - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn singular_values_invariant_under_orthogonal_similarity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let b = gaussian_matrix(6, 6, &mut rng);
        let a = &b + &b.t();
        let q = random_orthogonal(6, &mut rng);
        let rotated = q.dot(&a).dot(&q.t());
        let rotated = (&rotated + &rotated.t()) * 0.5;
        let s1 = truncated_svd(a.view(), 4).unwrap().s;
        let s2 = truncated_svd(rotated.view(), 4).unwrap().s;
        assert_abs_diff_eq!(s1, s2, epsilon = 1e-8 * s1[0]);
    }

    #[test]
    fn magnitude_order_prefers_large_absolute_values() {
        assert_eq!(magnitude_order(&[-1.0, 3.0, -5.0, 0.5]), vec![2, 1, 0, 3]);
    }
}
