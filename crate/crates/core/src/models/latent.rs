use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::linalg::{dense_top_eigen, ensure_finite, is_symmetric, orient_columns};

const PSD_TOL: f64 = 1e-10;
const RANK_RTOL: f64 = 1e-12;

/// Degree-corrected blockmodel parameters: `P = diag(γ) Z B Zᵀ diag(γ)`.
#[derive(Debug, Clone)]
pub struct LatentConfig {
    /// `n × d` membership matrix with exactly one positive entry per row.
    pub z: Array2<f64>,
    /// `d × d` symmetric PSD mixing matrix.
    pub b: Array2<f64>,
    /// Per-node degree parameters, all positive.
    pub gamma: Array1<f64>,
}

impl LatentConfig {
    /// Hard memberships from block labels in `0..d`.
    pub fn from_labels(labels: &[usize], b: Array2<f64>, gamma: Array1<f64>) -> Result<Self> {
        let d = b.nrows();
        let mut z = Array2::zeros((labels.len(), d));
        for (i, &k) in labels.iter().enumerate() {
            if k >= d {
                return Err(Error::Input(format!("node {i} has block {k} but B has {d} blocks")));
            }
            z[[i, k]] = 1.0;
        }
        let cfg = LatentConfig { z, b, gamma };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn n(&self) -> usize {
        self.z.nrows()
    }

    pub fn d(&self) -> usize {
        self.z.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        let (n, d) = self.z.dim();
        ensure_finite(self.z.view(), "membership matrix Z")?;
        ensure_finite(self.b.view(), "mixing matrix B")?;
        if n == 0 || d == 0 {
            return Err(Error::Dimension("Z must be nonempty".into()));
        }
        if self.b.dim() != (d, d) {
            return Err(Error::Dimension(format!(
                "B is {:?} but Z has {d} columns",
                self.b.dim()
            )));
        }
        if self.gamma.len() != n {
            return Err(Error::Dimension(format!(
                "gamma has {} entries, Z has {n} rows",
                self.gamma.len()
            )));
        }
        if let Some(g) = self.gamma.iter().find(|g| !(g.is_finite() && **g > 0.0)) {
            return Err(Error::Input(format!("degree parameters must be positive, found {g}")));
        }
        for (i, row) in self.z.rows().into_iter().enumerate() {
            if row.iter().any(|&v| v < 0.0) {
                return Err(Error::Input(format!("row {i} of Z has a negative entry")));
            }
            if row.iter().filter(|&&v| v > 0.0).count() != 1 {
                return Err(Error::Input(format!(
                    "row {i} of Z must have exactly one nonzero entry"
                )));
            }
        }
        let scale = self.b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        if !is_symmetric(self.b.view(), PSD_TOL * scale) {
            return Err(Error::Input("B must be symmetric".into()));
        }
        let (vals, _) = dense_top_eigen(self.b.view(), d)?;
        if vals.iter().any(|&l| l < -PSD_TOL * scale) {
            return Err(Error::Input("B must be positive semidefinite".into()));
        }
        Ok(())
    }

    /// Dense `P`. Quadratic in `n`; intended for checks and sampling.
    pub fn probabilities(&self) -> Array2<f64> {
        let g = &self.z * &self.gamma.view().insert_axis(ndarray::Axis(1));
        g.dot(&self.b).dot(&g.t())
    }
}

/// `d × d` matrix with `diag` on the diagonal and `off` elsewhere.
pub fn constant_mixing(d: usize, diag: f64, off: f64) -> Array2<f64> {
    Array2::from_shape_fn((d, d), |(i, j)| if i == j { diag } else { off })
}

/// Latent positions `X` with `XXᵀ = P`, equal to `Û Ŝ^{1/2}` from the rank-`d`
/// eigendecomposition of `P`.
///
/// With `G = diag(γ) Z` and `Σ = GᵀG` (diagonal), `GΣ^{-1/2}` has orthonormal columns and
/// `P = (GΣ^{-1/2}) Σ^{1/2} B Σ^{1/2} (GΣ^{-1/2})ᵀ`, so only the `d × d` middle factor needs
/// decomposing.
pub fn latent_from_blocks(cfg: &LatentConfig) -> Result<Array2<f64>> {
    cfg.validate()?;
    let (n, d) = cfg.z.dim();
    let mut label = vec![0usize; n];
    let mut weight = vec![0.0; n];
    let mut sigma = vec![0.0; d];
    for i in 0..n {
        let k = cfg.z.row(i).iter().position(|&v| v > 0.0).unwrap_or(0);
        let g = cfg.gamma[i] * cfg.z[[i, k]];
        label[i] = k;
        weight[i] = g;
        sigma[k] += g * g;
    }
    if let Some(k) = sigma.iter().position(|&s| s == 0.0) {
        return Err(Error::Rank(format!("block {k} is empty, so P has rank below {d}")));
    }
    let root: Vec<f64> = sigma.iter().map(|s| s.sqrt()).collect();
    let middle = Array2::from_shape_fn((d, d), |(k, l)| root[k] * cfg.b[[k, l]] * root[l]);
    let (vals, vecs) = dense_top_eigen(middle.view(), d)?;
    let top = vals[0].abs();
    if top == 0.0 || vals.iter().any(|&l| l <= RANK_RTOL * top) {
        let rank = vals.iter().filter(|&&l| l > RANK_RTOL * top).count();
        return Err(Error::Rank(format!("P has rank {rank}, fewer than the requested {d}")));
    }
    let scale = vals.mapv(f64::sqrt);
    let mut x = Array2::from_shape_fn((n, d), |(i, j)| {
        let k = label[i];
        weight[i] / root[k] * vecs[[k, j]] * scale[j]
    });
    let mut unused = Array2::zeros((0, d));
    orient_columns(&mut x, &mut unused);
    Ok(x)
}

/// `XXᵀ`.
pub fn gram(x: ArrayView2<'_, f64>) -> Array2<f64> {
    x.dot(&x.t())
}
