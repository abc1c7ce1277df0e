use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;

use super::{ensure_finite, from_faer, gaussian_matrix, to_faer};
use crate::error::{Error, Result};

/// Orthogonal `Q` minimising `‖Xhat·Q − X‖_F`, from the SVD of `XhatᵀX`.
pub fn procrustes(xhat: ArrayView2<'_, f64>, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    if xhat.dim() != x.dim() {
        return Err(Error::Dimension(format!(
            "procrustes needs equal shapes, got {:?} and {:?}",
            xhat.dim(),
            x.dim()
        )));
    }
    ensure_finite(xhat, "procrustes source")?;
    ensure_finite(x, "procrustes target")?;
    let cross = xhat.t().dot(&x);
    polar_factor(cross.view())
}

/// `U Vᵀ` for `M = U S Vᵀ`; orthogonal even when `M` is singular.
fn polar_factor(m: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let svd = to_faer(m)
        .svd()
        .map_err(|e| Error::Numerical(format!("svd did not converge: {e:?}")))?;
    let u = from_faer(svd.U());
    let v = from_faer(svd.V());
    Ok(u.dot(&v.t()))
}

/// Haar-distributed random orthogonal matrix (QR of a Gaussian matrix with sign fix).
pub fn random_orthogonal<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Array2<f64> {
    let g = gaussian_matrix(d, d, rng);
    let qr = to_faer(g.view()).qr();
    let q = from_faer(qr.compute_Q().as_ref());
    let r = qr.R();
    let mut out = q;
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            out.column_mut(j).mapv_inplace(|v| -v);
        }
    }
    out
}

/// Sum over columns of the variance of the squared loadings.
pub fn varimax_criterion(loadings: ArrayView2<'_, f64>) -> f64 {
    let n = loadings.nrows() as f64;
    loadings
        .columns()
        .into_iter()
        .map(|c| {
            let m2 = c.iter().map(|v| v * v).sum::<f64>() / n;
            let m4 = c.iter().map(|v| v.powi(4)).sum::<f64>() / n;
            m4 - m2 * m2
        })
        .sum()
}

/// Varimax rotation settings. Kaiser row normalisation is off unless requested.
#[derive(Debug, Clone, Copy)]
pub struct Varimax {
    pub max_iter: usize,
    pub tol: f64,
    pub kaiser_normalize: bool,
}

impl Default for Varimax {
    fn default() -> Self {
        Varimax {
            max_iter: 1000,
            tol: 1e-12,
            kaiser_normalize: false,
        }
    }
}

impl Varimax {
    /// Orthogonal `R` such that `V·R` is a local maximum of [`varimax_criterion`].
    ///
    /// Uses the SVD form of Kaiser's update, which never decreases the criterion. Returns
    /// `[[1]]` when `V` has a single column.
    pub fn rotation(&self, v: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        ensure_finite(v, "varimax loadings")?;
        if self.max_iter == 0 {
            return Err(Error::Input("varimax needs max_iter >= 1".into()));
        }
        let (n, k) = v.dim();
        if k == 1 {
            return Ok(Array2::eye(1));
        }
        let x = if self.kaiser_normalize {
            let norms = v.map_axis(Axis(1), |r| r.dot(&r).sqrt());
            let mut x = v.to_owned();
            for (mut row, &nrm) in x.rows_mut().into_iter().zip(norms.iter()) {
                if nrm > 0.0 {
                    row /= nrm;
                }
            }
            x
        } else {
            v.to_owned()
        };

        let nf = n as f64;
        let mut rot = Array2::eye(k);
        let mut crit = varimax_criterion(x.view());
        for _ in 0..self.max_iter {
            let z = x.dot(&rot);
            let col_ss = z.map_axis(Axis(0), |c| c.dot(&c) / nf);
            let target = z.mapv(|v| v.powi(3)) - &z * &col_ss;
            let grad = x.t().dot(&target);
            let next = polar_factor(grad.view())?;
            let next_crit = varimax_criterion(x.dot(&next).view());
            if next_crit < crit {
                break;
            }
            let gain = next_crit - crit;
            rot = next;
            crit = next_crit;
            if gain < self.tol {
                break;
            }
        }
        Ok(rot)
    }
}

pub fn varimax(v: ArrayView2<'_, f64>, max_iter: usize, tol: f64) -> Result<Array2<f64>> {
    Varimax {
        max_iter,
        tol,
        kaiser_normalize: false,
    }
    .rotation(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn orth_error(q: &Array2<f64>) -> f64 {
        max_abs_diff(q.t().dot(q).view(), Array2::eye(q.ncols()).view())
    }

    #[test]
    fn procrustes_identity_when_aligned() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = gaussian_matrix(20, 3, &mut rng);
        let q = procrustes(x.view(), x.view()).unwrap();
        assert_abs_diff_eq!(q, Array2::eye(3), epsilon = 1e-12);
    }

    #[test]
    fn procrustes_recovers_known_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = gaussian_matrix(30, 4, &mut rng);
        let r = random_orthogonal(4, &mut rng);
        let xhat = x.dot(&r);
        let q = procrustes(xhat.view(), x.view()).unwrap();
        assert_abs_diff_eq!(q, r.t().to_owned(), epsilon = 1e-8);
        assert!(orth_error(&q) <= 1e-10);
    }

    #[test]
    fn procrustes_beats_random_rotations() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = gaussian_matrix(40, 3, &mut rng);
        let r = random_orthogonal(3, &mut rng);
        let xhat = x.dot(&r) + gaussian_matrix(40, 3, &mut rng) * 0.1;
        let q = procrustes(xhat.view(), x.view()).unwrap();
        let best = super::super::frobenius((xhat.dot(&q) - &x).view());
        for _ in 0..1000 {
            let other = random_orthogonal(3, &mut rng);
            let err = super::super::frobenius((xhat.dot(&other) - &x).view());
            assert!(best <= err + 1e-12);
        }
    }

    #[test]
    fn procrustes_rank_deficient_still_orthogonal() {
        let xhat = array![[1.0, 0.0], [2.0, 0.0], [3.0, 0.0]];
        let x = array![[0.0, 1.0], [0.0, 2.0], [0.0, 3.0]];
        let q = procrustes(xhat.view(), x.view()).unwrap();
        assert!(orth_error(&q) <= 1e-10);
    }

    #[test]
    fn procrustes_shape_mismatch() {
        let a = Array2::<f64>::zeros((3, 2));
        let b = Array2::<f64>::zeros((3, 3));
        assert!(matches!(procrustes(a.view(), b.view()), Err(Error::Dimension(_))));
    }

    #[test]
    fn random_orthogonal_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for d in 1..6 {
            assert!(orth_error(&random_orthogonal(d, &mut rng)) < 1e-12);
        }
    }

    #[test]
    fn varimax_single_column_is_identity() {
        let v = array![[1.0], [2.0]];
        assert_eq!(varimax(v.view(), 10, 1e-10).unwrap(), array![[1.0]]);
    }

    #[test]
    fn varimax_fixed_point_on_simple_structure() {
        // one nonzero per row, columns permuted
        let v = array![
            [0.0, 0.9, 0.0],
            [0.0, 0.7, 0.0],
            [0.8, 0.0, 0.0],
            [0.0, 0.0, 0.6],
            [0.5, 0.0, 0.0],
            [0.0, 0.0, 0.9]
        ];
        let r = varimax(v.view(), 100, 1e-12).unwrap();
        let before = varimax_criterion(v.view());
        let after = varimax_criterion(v.dot(&r).view());
        assert!((after - before).abs() <= 1e-6);
        // R is a signed permutation
        for row in r.rows() {
            let big = row.iter().filter(|x| x.abs() > 1.0 - 1e-6).count();
            assert_eq!(big, 1);
        }
    }

    #[test]
    fn varimax_beats_random_rotations() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let v = gaussian_matrix(50, 3, &mut rng);
        let r = varimax(v.view(), 1000, 1e-12).unwrap();
        assert!(orth_error(&r) < 1e-10);
        let best = varimax_criterion(v.dot(&r).view());
        for _ in 0..1000 {
            let q = random_orthogonal(3, &mut rng);
            assert!(best + 1e-12 >= varimax_criterion(v.dot(&q).view()));
        }
    }

    #[test]
    fn kaiser_normalization_still_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let v = gaussian_matrix(30, 4, &mut rng);
        let opts = Varimax {
            kaiser_normalize: true,
            ..Varimax::default()
        };
        let r = opts.rotation(v.view()).unwrap();
        assert!(orth_error(&r) < 1e-10);
    }
}
