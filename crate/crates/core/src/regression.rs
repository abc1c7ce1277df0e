//! Outcome and mediator regressions with heteroskedasticity-robust sandwich covariances.
//!
//! Outcome model: `Y = W β_w + Xhat β_x + ε` with design `D = [W Xhat]`.
//! Mediator model: `Xhat = W Θ + ξ`.
//!
//! Covariances are for `√n (estimate − truth)`, i.e. `Var(β̂) ≈ Σ_β / n`:
//!
//! * `Σ_β = A⁻¹ B A⁻ᵀ`, `A = DᵀD/n`, `B = (1/n) Σᵢ ε̂ᵢ² Dᵢᵀ Dᵢ`
//! * `Σ_θ = A_θ⁻¹ B_θ A_θ⁻ᵀ`, `A_θ = I_d ⊗ WᵀW/n`, `B_θ = (1/n) Σᵢ ξ̂ᵢᵀ ξ̂ᵢ ⊗ Wᵢᵀ Wᵢ`
//!
//! `Σ_θ` indexes `vec(Θ)` by column stacking: entry `Θ[r, j]` sits at `j·q + r` where `q` is the
//! number of columns of `W`.
//!
//! Least squares is solved through a thin SVD of the design rather than the normal equations.

use ndarray::{concatenate, s, Array1, Array2, ArrayView1, ArrayView2, Axis};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ensure_finite, from_faer, to_faer};

/// Relative smallest-singular-value threshold below which a design counts as collinear.
pub const COLLINEARITY_RTOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovarianceKind {
    /// No small-sample correction.
    #[default]
    Hc0,
    /// Scales HC0 by `n / (n − k)`.
    Hc1,
}

#[derive(Debug, Clone)]
pub struct OutcomeFit {
    /// `[β_w; β_x]`, length `p + 2 + d`.
    pub beta: Array1<f64>,
    pub residuals: Array1<f64>,
    pub sigma_beta: Array2<f64>,
    pub n: usize,
    /// Columns of `W`; `p + 2` when `W = [1, T, C]`.
    pub q: usize,
    pub d: usize,
    pub covariance: CovarianceKind,
    design: Array2<f64>,
    response: Array1<f64>,
}

impl OutcomeFit {
    /// Number of controls `p` in `W = [1, T, C]`.
    pub fn p(&self) -> usize {
        self.q.saturating_sub(2)
    }

    pub fn beta_w(&self) -> ArrayView1<'_, f64> {
        self.beta.slice(s![..self.q])
    }

    pub fn beta_x(&self) -> ArrayView1<'_, f64> {
        self.beta.slice(s![self.q..])
    }

    /// Trailing `d×d` block of `Σ_β`.
    pub fn sigma_beta_x(&self) -> ArrayView2<'_, f64> {
        let q = self.q;
        self.sigma_beta.slice(s![q.., q..])
    }

    pub fn design(&self) -> &Array2<f64> {
        &self.design
    }

    pub fn response(&self) -> &Array1<f64> {
        &self.response
    }

    pub fn covariates(&self) -> ArrayView2<'_, f64> {
        self.design.slice(s![.., ..self.q])
    }

    /// The sandwich meat `B̂` (before any small-sample scaling).
    pub fn meat(&self) -> Array2<f64> {
        outcome_meat(self.design.view(), self.residuals.view())
    }

    pub fn fitted(&self) -> Array1<f64> {
        self.design.dot(&self.beta)
    }
}

#[derive(Debug, Clone)]
pub struct MediatorFit {
    /// `(p + 2) × d`.
    pub theta: Array2<f64>,
    pub residuals: Array2<f64>,
    /// Covariance of `√n vec(Θ̂)`, `(p + 2)d` square.
    pub sigma_theta: Array2<f64>,
    pub n: usize,
    pub q: usize,
    pub d: usize,
    pub covariance: CovarianceKind,
    covariates: Array2<f64>,
    positions: Array2<f64>,
}

impl MediatorFit {
    pub fn p(&self) -> usize {
        self.q.saturating_sub(2)
    }

    pub fn covariates(&self) -> &Array2<f64> {
        &self.covariates
    }

    pub fn positions(&self) -> &Array2<f64> {
        &self.positions
    }

    /// Position of `Θ[row, col]` in `vec(Θ)`.
    /// The sandwich meat for `vec(Θ)`, indexed like [`MediatorFit::vec_index`].
    pub fn meat(&self) -> Array2<f64> {
        mediator_meat(self.covariates.view(), self.residuals.view())
    }

    pub fn vec_index(&self, row: usize, col: usize) -> usize {
        col * self.q + row
    }
}

/// Thin-SVD least-squares solver for a full-column-rank design.
pub(crate) struct LeastSquares {
    u: Array2<f64>,
    s: Array1<f64>,
    v: Array2<f64>,
}

impl LeastSquares {
    pub(crate) fn new(design: ArrayView2<'_, f64>) -> Result<Self> {
        let (n, k) = design.dim();
        if n < k {
            return Err(Error::Collinear {
                columns: (0..k).collect(),
                ratio: 0.0,
            });
        }
        let svd = to_faer(design)
            .thin_svd()
            .map_err(|e| Error::Numerical(format!("svd did not converge: {e:?}")))?;
        let sv = svd.S().column_vector();
        let s = Array1::from_shape_fn(k, |i| sv[i]);
        let v = from_faer(svd.V());
        let smax = s[0];
        let smin = s[k - 1];
        if smax == 0.0 || smin <= COLLINEARITY_RTOL * smax {
            let null = v.column(k - 1);
            let peak = null.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let columns = (0..k).filter(|&j| null[j].abs() >= 0.1 * peak).collect();
            return Err(Error::Collinear {
                columns,
                ratio: if smax > 0.0 { smin / smax } else { 0.0 },
            });
        }
        Ok(LeastSquares {
            u: from_faer(svd.U()),
            s,
            v,
        })
    }

    /// `(DᵀD)⁻¹ Dᵀ rhs` for each column of `rhs`.
    pub(crate) fn solve(&self, rhs: ArrayView2<'_, f64>) -> Array2<f64> {
        let proj = self.u.t().dot(&rhs);
        let scaled = &proj / &self.s.view().insert_axis(Axis(1));
        self.v.dot(&scaled)
    }

    pub(crate) fn solve_vec(&self, rhs: ArrayView1<'_, f64>) -> Array1<f64> {
        let proj = self.u.t().dot(&rhs) / &self.s;
        self.v.dot(&proj)
    }

    /// `(DᵀD)⁻¹ = V S⁻² Vᵀ`.
    pub(crate) fn gram_inverse(&self) -> Array2<f64> {
        let inv_s2 = self.s.mapv(|s| 1.0 / (s * s));
        (&self.v * &inv_s2).dot(&self.v.t())
    }
}

fn check_rows(w: ArrayView2<'_, f64>, xhat: ArrayView2<'_, f64>) -> Result<()> {
    ensure_finite(w, "covariate matrix W")?;
    ensure_finite(xhat, "latent positions")?;
    if w.nrows() != xhat.nrows() {
        return Err(Error::Dimension(format!(
            "W has {} rows but the positions have {}",
            w.nrows(),
            xhat.nrows()
        )));
    }
    if w.ncols() == 0 {
        return Err(Error::Dimension("W has no columns".into()));
    }
    Ok(())
}

fn hc_scale(kind: CovarianceKind, n: usize, k: usize) -> f64 {
    match kind {
        CovarianceKind::Hc0 => 1.0,
        CovarianceKind::Hc1 => n as f64 / (n - k).max(1) as f64,
    }
}

pub fn fit_outcome(w: ArrayView2<'_, f64>, xhat: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>) -> Result<OutcomeFit> {
    fit_outcome_with(w, xhat, y, CovarianceKind::Hc0)
}

pub fn fit_outcome_with(
    w: ArrayView2<'_, f64>,
    xhat: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    kind: CovarianceKind,
) -> Result<OutcomeFit> {
    check_rows(w, xhat)?;
    if y.len() != w.nrows() {
        return Err(Error::Dimension(format!(
            "Y has {} entries, W has {} rows",
            y.len(),
            w.nrows()
        )));
    }
    if let Some(v) = y.iter().find(|v| !v.is_finite()) {
        return Err(Error::Input(format!("outcome has non-finite value {v}")));
    }
    let design = concatenate![Axis(1), w, xhat];
    let (n, k) = design.dim();
    let ls = LeastSquares::new(design.view())?;
    let beta = ls.solve_vec(y);
    let residuals = &y - &design.dot(&beta);

    let nf = n as f64;
    let bread = ls.gram_inverse() * nf;
    let meat = outcome_meat(design.view(), residuals.view());
    let mut sigma_beta = bread.dot(&meat).dot(&bread.t()) * hc_scale(kind, n, k);
    symmetrize(&mut sigma_beta);

    Ok(OutcomeFit {
        beta,
        residuals,
        sigma_beta,
        n,
        q: w.ncols(),
        d: xhat.ncols(),
        covariance: kind,
        design,
        response: y.to_owned(),
    })
}

pub fn fit_mediator(w: ArrayView2<'_, f64>, xhat: ArrayView2<'_, f64>) -> Result<MediatorFit> {
    fit_mediator_with(w, xhat, CovarianceKind::Hc0)
}

pub fn fit_mediator_with(
    w: ArrayView2<'_, f64>,
    xhat: ArrayView2<'_, f64>,
    kind: CovarianceKind,
) -> Result<MediatorFit> {
    check_rows(w, xhat)?;
    let (n, q) = w.dim();
    let d = xhat.ncols();
    let ls = LeastSquares::new(w)?;
    let theta = ls.solve(xhat);
    let residuals = &xhat - &w.dot(&theta);

    let nf = n as f64;
    let bread = ls.gram_inverse() * nf;
    let scale = hc_scale(kind, n, q);
    let meat = mediator_meat(w, residuals.view());
    let mut sigma_theta = Array2::zeros((q * d, q * d));
    for j in 0..d {
        for jj in 0..d {
            let block = meat.slice(s![j * q..(j + 1) * q, jj * q..(jj + 1) * q]);
            sigma_theta
                .slice_mut(s![j * q..(j + 1) * q, jj * q..(jj + 1) * q])
                .assign(&(bread.dot(&block).dot(&bread) * scale));
        }
    }
    symmetrize(&mut sigma_theta);

    Ok(MediatorFit {
        theta,
        residuals,
        sigma_theta,
        n,
        q,
        d,
        covariance: kind,
        covariates: w.to_owned(),
        positions: xhat.to_owned(),
    })
}

/// `β_x` through the Frisch–Waugh–Lovell route: `(XhatᵀM Xhat)⁻¹ XhatᵀM Y` with
/// `M = I − W(WᵀW)⁻¹Wᵀ`, the projection onto the orthogonal complement of `span(W)`.
pub fn fit_outcome_fwl(
    w: ArrayView2<'_, f64>,
    xhat: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
) -> Result<Array1<f64>> {
    check_rows(w, xhat)?;
    if y.len() != w.nrows() {
        return Err(Error::Dimension(format!(
            "Y has {} entries, W has {} rows",
            y.len(),
            w.nrows()
        )));
    }
    let on_w = LeastSquares::new(w)?;
    let resid_x = &xhat - &w.dot(&on_w.solve(xhat));
    let resid_y = &y - &w.dot(&on_w.solve_vec(y));
    let on_resid = LeastSquares::new(resid_x.view()).map_err(|e| match e {
        // report indices in the joint [W Xhat] numbering
        Error::Collinear { columns, ratio } => Error::Collinear {
            columns: columns.into_iter().map(|c| c + w.ncols()).collect(),
            ratio,
        },
        other => other,
    })?;
    Ok(on_resid.solve_vec(resid_y.view()))
}

/// `B̂ = (1/n) Σᵢ eᵢ² DᵢDᵢᵀ` for design rows `Dᵢ` and residuals `eᵢ`.
fn outcome_meat(design: ArrayView2<'_, f64>, residuals: ArrayView1<'_, f64>) -> Array2<f64> {
    let weighted = &design * &residuals.insert_axis(Axis(1));
    weighted.t().dot(&weighted) / design.nrows() as f64
}

/// `(1/n) Σᵢ vec(Wᵢξᵢᵀ) vec(Wᵢξᵢᵀ)ᵀ`, so block `(j, j')` is `(1/n) Σᵢ ξᵢⱼ ξᵢⱼ' WᵢWᵢᵀ`.
fn mediator_meat(w: ArrayView2<'_, f64>, residuals: ArrayView2<'_, f64>) -> Array2<f64> {
    let (n, q) = w.dim();
    let d = residuals.ncols();
    let mut meat = Array2::zeros((q * d, q * d));
    for j in 0..d {
        for jj in j..d {
            let weights = &residuals.column(j) * &residuals.column(jj);
            let weighted = &w * &weights.view().insert_axis(Axis(1));
            let block = weighted.t().dot(&w) / n as f64;
            meat.slice_mut(s![j * q..(j + 1) * q, jj * q..(jj + 1) * q])
                .assign(&block);
            if jj != j {
                meat.slice_mut(s![jj * q..(jj + 1) * q, j * q..(j + 1) * q])
                    .assign(&block.t());
            }
        }
    }
    meat
}

fn symmetrize(m: &mut Array2<f64>) {
    let t = m.t().to_owned();
    *m += &t;
    *m *= 0.5;
}
