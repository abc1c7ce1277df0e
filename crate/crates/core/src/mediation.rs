//! Natural direct and indirect effects from the outcome and mediator fits.
//!
//! For a contrast `c = t − t*`:
//!
//! * `nde = c·β_t`, `σ²_nde = c²·Σ_{β_t}`
//! * `nie = c·θ_t·β_x`, `σ²_nie = c²·(β_xᵀ Σ_{θ_t} β_x + θ_t Σ_{β_x} θ_tᵀ)`
//!
//! where `θ_t` is the treatment row of `Θ`. Variances are for `√n (estimate − truth)`, so
//! intervals are `estimate ± z·√(σ²/n)`. The total effect is `nde + nie`; its variance adds the
//! two, dropping the outcome/mediator cross-covariance, which vanishes asymptotically.

use std::fmt;

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::embedding::{default_side, Embedding, Side, Spectrum};
use crate::error::{Error, Result};
use crate::linalg::max_abs_diff;
use crate::network::AdjacencyMatrix;
use crate::regression::{fit_mediator_with, fit_outcome_with, CovarianceKind, MediatorFit, OutcomeFit};

const ORTHOGONALITY_TOL: f64 = 1e-8;

/// Treatment levels compared: `t` versus the reference `t*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contrast {
    pub t: f64,
    pub t_star: f64,
}

impl Contrast {
    pub fn new(t: f64, t_star: f64) -> Self {
        Contrast { t, t_star }
    }

    pub fn delta(&self) -> f64 {
        self.t - self.t_star
    }
}

impl Default for Contrast {
    fn default() -> Self {
        Contrast { t: 1.0, t_star: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EffectKind {
    Nde,
    Nie,
    Total,
}

impl EffectKind {
    pub const ALL: [EffectKind; 3] = [EffectKind::Nde, EffectKind::Nie, EffectKind::Total];
}

impl fmt::Display for EffectKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EffectKind::Nde => "nde",
            EffectKind::Nie => "nie",
            EffectKind::Total => "total",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectEstimate {
    pub kind: EffectKind,
    pub point: f64,
    /// Asymptotic variance of `√n (estimate − truth)`.
    pub sigma2: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub alpha: f64,
    pub n: usize,
    pub d: usize,
    pub contrast: Contrast,
}

impl EffectEstimate {
    fn new(kind: EffectKind, point: f64, sigma2: f64, alpha: f64, n: usize, d: usize, contrast: Contrast) -> Self {
        let half = normal_quantile(alpha) * (sigma2 / n as f64).sqrt();
        EffectEstimate {
            kind,
            point,
            sigma2,
            ci_low: point - half,
            ci_high: point + half,
            alpha,
            n,
            d,
            contrast,
        }
    }

    pub fn std_error(&self) -> f64 {
        (self.sigma2 / self.n as f64).sqrt()
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.ci_high - self.ci_low)
    }

    pub fn covers(&self, truth: f64) -> bool {
        self.ci_low <= truth && truth <= self.ci_high
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Effects {
    pub nde: EffectEstimate,
    pub nie: EffectEstimate,
    pub total: EffectEstimate,
}

impl Effects {
    pub fn get(&self, kind: EffectKind) -> &EffectEstimate {
        match kind {
            EffectKind::Nde => &self.nde,
            EffectKind::Nie => &self.nie,
            EffectKind::Total => &self.total,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &EffectEstimate> {
        [&self.nde, &self.nie, &self.total].into_iter()
    }
}

/// `z_{1−α/2}`.
pub fn normal_quantile(alpha: f64) -> f64 {
    Normal::standard().inverse_cdf(1.0 - alpha / 2.0)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Input(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// `Σ_{θ_t}`: the `d × d` block of `Σ_θ` for the treatment row of `Θ`, whose entries sit at
/// `j·q + treatment_index` in the column-stacked `vec(Θ)`.
pub fn sigma_theta_t(med: &MediatorFit, treatment_index: usize) -> Array2<f64> {
    let idx: Vec<usize> = (0..med.d).map(|j| med.vec_index(treatment_index, j)).collect();
    Array2::from_shape_fn((med.d, med.d), |(a, b)| med.sigma_theta[[idx[a], idx[b]]])
}

/// `c²·(β_xᵀ Σ_{θ_t} β_x + θ_t Σ_{β_x} θ_tᵀ)`, floored at zero.
pub fn nie_variance(
    theta_t: ArrayView1<'_, f64>,
    beta_x: ArrayView1<'_, f64>,
    sigma_theta_t: ArrayView2<'_, f64>,
    sigma_beta_x: ArrayView2<'_, f64>,
    delta: f64,
) -> f64 {
    let a = beta_x.dot(&sigma_theta_t.dot(&beta_x));
    let b = theta_t.dot(&sigma_beta_x.dot(&theta_t));
    (delta * delta * (a + b)).max(0.0)
}

pub fn estimate_effects(
    out: &OutcomeFit,
    med: &MediatorFit,
    contrast: Contrast,
    alpha: f64,
    treatment_index: usize,
) -> Result<Effects> {
    check_alpha(alpha)?;
    if (out.n, out.q, out.d) != (med.n, med.q, med.d) {
        return Err(Error::Dimension(format!(
            "outcome fit has (n, q, d) = ({}, {}, {}) but mediator fit has ({}, {}, {})",
            out.n, out.q, out.d, med.n, med.q, med.d
        )));
    }
    if treatment_index >= out.q {
        return Err(Error::Dimension(format!(
            "treatment index {treatment_index} outside the {} covariate columns",
            out.q
        )));
    }
    let c = contrast.delta();
    let (n, d) = (out.n, out.d);

    let beta_x = out.beta_x();
    let theta_t = med.theta.row(treatment_index);

    let nde_point = c * out.beta[treatment_index];
    let nde_var = (c * c * out.sigma_beta[[treatment_index, treatment_index]]).max(0.0);
    let nie_point = c * theta_t.dot(&beta_x);
    let s_theta = sigma_theta_t(med, treatment_index);
    let nie_var = nie_variance(theta_t, beta_x, s_theta.view(), out.sigma_beta_x(), c);

    Ok(Effects {
        nde: EffectEstimate::new(EffectKind::Nde, nde_point, nde_var, alpha, n, d, contrast),
        nie: EffectEstimate::new(EffectKind::Nie, nie_point, nie_var, alpha, n, d, contrast),
        total: EffectEstimate::new(
            EffectKind::Total,
            nde_point + nie_point,
            nde_var + nie_var,
            alpha,
            n,
            d,
            contrast,
        ),
    })
}

/// Fits both regressions on `(W, Xhat, Y)` and combines them.
pub fn effects_from_data(
    w: ArrayView2<'_, f64>,
    xhat: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    opts: &MediationOptions,
) -> Result<(OutcomeFit, MediatorFit, Effects)> {
    let out = fit_outcome_with(w, xhat, y, opts.covariance)?;
    let med = fit_mediator_with(w, xhat, opts.covariance)?;
    let effects = estimate_effects(&out, &med, opts.contrast, opts.alpha, opts.treatment_index)?;
    Ok((out, med, effects))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationCheck {
    pub max_point_deviation: f64,
    pub max_sigma2_deviation: f64,
}

impl RotationCheck {
    pub fn max_deviation(&self) -> f64 {
        self.max_point_deviation.max(self.max_sigma2_deviation)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_deviation() <= tol
    }
}

/// Refits with `Xhat·Q` and reports how far the effect points and variances moved.
pub fn rotation_invariance_check(
    out: &OutcomeFit,
    med: &MediatorFit,
    q: ArrayView2<'_, f64>,
    contrast: Contrast,
    alpha: f64,
    treatment_index: usize,
) -> Result<RotationCheck> {
    let d = out.d;
    if q.dim() != (d, d) {
        return Err(Error::Dimension(format!("rotation is {:?}, expected {d}x{d}", q.dim())));
    }
    let orth = max_abs_diff(q.t().dot(&q).view(), Array2::eye(d).view());
    if orth > ORTHOGONALITY_TOL {
        return Err(Error::Input(format!(
            "rotation is not orthogonal (|QᵀQ − I| = {orth:.2e})"
        )));
    }
    let base = estimate_effects(out, med, contrast, alpha, treatment_index)?;
    let xq = med.positions().dot(&q);
    let w = med.covariates();
    let out_q = fit_outcome_with(w.view(), xq.view(), out.response().view(), out.covariance)?;
    let med_q = fit_mediator_with(w.view(), xq.view(), med.covariance)?;
    let rotated = estimate_effects(&out_q, &med_q, contrast, alpha, treatment_index)?;
    let mut check = RotationCheck {
        max_point_deviation: 0.0,
        max_sigma2_deviation: 0.0,
    };
    for (a, b) in base.iter().zip(rotated.iter()) {
        check.max_point_deviation = check.max_point_deviation.max((a.point - b.point).abs());
        check.max_sigma2_deviation = check.max_sigma2_deviation.max((a.sigma2 - b.sigma2).abs());
    }
    Ok(check)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MediationOptions {
    pub contrast: Contrast,
    pub alpha: f64,
    /// `None` picks [`default_side`] for the network kind.
    pub side: Option<Side>,
    pub varimax: bool,
    pub treatment_index: usize,
    pub covariance: CovarianceKind,
}

impl Default for MediationOptions {
    fn default() -> Self {
        MediationOptions {
            contrast: Contrast::default(),
            alpha: 0.05,
            side: None,
            varimax: false,
            treatment_index: 1,
            covariance: CovarianceKind::Hc0,
        }
    }
}

impl MediationOptions {
    pub fn side_for(&self, a: &AdjacencyMatrix) -> Side {
        self.side.unwrap_or_else(|| default_side(a.kind()))
    }
}

/// One dimension of a sensitivity curve. `effects` is `None` when the fit failed at this `d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub d: usize,
    pub effects: Option<Effects>,
    pub error: Option<String>,
}

/// Effects for each `d` in `d_min..=d_max`, from a single rank-`d_max` decomposition.
/// A failure at one `d` (typically collinearity) is recorded in its row.
pub fn sensitivity_curve(
    a: &AdjacencyMatrix,
    w: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    d_min: usize,
    d_max: usize,
    opts: &MediationOptions,
) -> Result<Vec<CurveRow>> {
    check_alpha(opts.alpha)?;
    if d_min == 0 || d_min > d_max {
        return Err(Error::Input(format!("invalid dimension range {d_min}:{d_max}")));
    }
    check_alignment(a, w, y)?;
    let spectrum = Spectrum::compute(a, d_max)?;
    let side = opts.side_for(a);
    (d_min..=d_max)
        .map(|d| {
            let row = spectrum
                .embedding(d, side, opts.varimax)
                .and_then(|e| effects_from_data(w, e.positions().view(), y, opts));
            Ok(match row {
                Ok((_, _, effects)) => CurveRow {
                    d,
                    effects: Some(effects),
                    error: None,
                },
                Err(e @ (Error::Collinear { .. } | Error::Rank(_) | Error::Numerical(_))) => CurveRow {
                    d,
                    effects: None,
                    error: Some(e.to_string()),
                },
                Err(e) => return Err(e),
            })
        })
        .collect()
}

fn check_alignment(a: &AdjacencyMatrix, w: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>) -> Result<()> {
    if a.nrows() != w.nrows() || y.len() != w.nrows() {
        return Err(Error::Dimension(format!(
            "network has {} rows but the covariate table has {} (outcome {})",
            a.nrows(),
            w.nrows(),
            y.len()
        )));
    }
    Ok(())
}

/// Coefficient estimates with robust standard errors `√(Σ_jj / n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MediationReport {
    pub n: usize,
    pub d: usize,
    pub side: Side,
    pub rotation: String,
    pub contrast: Contrast,
    pub alpha: f64,
    pub treatment_index: usize,
    pub nde: EffectEstimate,
    pub nie: EffectEstimate,
    pub total: EffectEstimate,
    pub singular_values: Vec<f64>,
    /// Outcome model `[W, Xhat]` coefficients.
    pub outcome: Vec<Coefficient>,
    /// Mediator model: one table per latent dimension.
    pub mediator: Vec<Vec<Coefficient>>,
    pub rotation_check: RotationCheck,
}

/// Embeds `a`, fits both models and assembles a report. `names` labels the columns of `W`;
/// missing names fall back to `w0, w1, ...`.
pub fn mediate(
    a: &AdjacencyMatrix,
    w: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    d: usize,
    opts: &MediationOptions,
    names: &[String],
) -> Result<MediationReport> {
    check_alpha(opts.alpha)?;
    check_alignment(a, w, y)?;
    let side = opts.side_for(a);
    let embedding = Spectrum::compute(a, d)?.embedding(d, side, opts.varimax)?;
    report_from_embedding(&embedding, w, y, opts, names)
}

pub fn report_from_embedding(
    embedding: &Embedding,
    w: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    opts: &MediationOptions,
    names: &[String],
) -> Result<MediationReport> {
    let (out, med, effects) = effects_from_data(w, embedding.positions().view(), y, opts)?;
    // a fixed coordinate permutation with one sign flip exercises the cancellation cheaply
    let d = out.d;
    let perm = Array2::from_shape_fn((d, d), |(i, j)| {
        if j == (i + 1) % d {
            if i == 0 {
                -1.0
            } else {
                1.0
            }
        } else {
            0.0
        }
    });
    let rotation_check =
        rotation_invariance_check(&out, &med, perm.view(), opts.contrast, opts.alpha, opts.treatment_index)?;

    let w_names: Vec<String> = (0..out.q)
        .map(|j| names.get(j).cloned().unwrap_or_else(|| format!("w{j}")))
        .collect();
    let x_names: Vec<String> = (1..=d).map(|j| format!("x{j}")).collect();
    let nf = out.n as f64;
    let outcome = w_names
        .iter()
        .chain(x_names.iter())
        .enumerate()
        .map(|(j, name)| Coefficient {
            name: name.clone(),
            estimate: out.beta[j],
            std_error: (out.sigma_beta[[j, j]].max(0.0) / nf).sqrt(),
        })
        .collect();
    let mediator = (0..d)
        .map(|col| {
            w_names
                .iter()
                .enumerate()
                .map(|(row, name)| {
                    let k = med.vec_index(row, col);
                    Coefficient {
                        name: name.clone(),
                        estimate: med.theta[[row, col]],
                        std_error: (med.sigma_theta[[k, k]].max(0.0) / nf).sqrt(),
                    }
                })
                .collect()
        })
        .collect();

    Ok(MediationReport {
        n: out.n,
        d,
        side: embedding.side(),
        rotation: if embedding.is_rotated() { "varimax" } else { "none" }.to_string(),
        contrast: opts.contrast,
        alpha: opts.alpha,
        treatment_index: opts.treatment_index,
        nde: effects.nde,
        nie: effects.nie,
        total: effects.total,
        singular_values: embedding.singular_values().to_vec(),
        outcome,
        mediator,
        rotation_check,
    })
}

impl MediationReport {
    pub fn effects(&self) -> Effects {
        Effects {
            nde: self.nde,
            nie: self.nie,
            total: self.total,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{gaussian_matrix, random_orthogonal};
    use crate::regression::{fit_mediator, fit_outcome};
    use ndarray::{array, s, Array1, Axis};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn instance(seed: u64, n: usize, p: usize, d: usize) -> (Array2<f64>, Array2<f64>, Array1<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = Array2::ones((n, p + 2));
        w.slice_mut(s![.., 1..]).assign(&gaussian_matrix(n, p + 1, &mut rng));
        let xhat = w.slice(s![.., 1..2]).to_owned() * 0.5 + gaussian_matrix(n, d, &mut rng);
        let noise = gaussian_matrix(n, 1, &mut rng).column(0).to_owned();
        let y = w.sum_axis(Axis(1)) + xhat.sum_axis(Axis(1)) + noise;
        (w, xhat, y)
    }

    fn fits(seed: u64) -> (OutcomeFit, MediatorFit) {
        let (w, xhat, y) = instance(seed, 80, 1, 3);
        (
            fit_outcome(w.view(), xhat.view(), y.view()).unwrap(),
            fit_mediator(w.view(), xhat.view()).unwrap(),
        )
    }

    #[test]
    fn hand_computed_nie_variance() {
        let v = nie_variance(
            array![3.0, 4.0].view(),
            array![1.0, 2.0].view(),
            Array2::eye(2).view(),
            Array2::eye(2).view(),
            1.0,
        );
        assert_eq!(v, 30.0);
    }

    #[test]
    fn zero_beta_x_leaves_theta_term() {
        let theta_t = array![0.5, -1.0];
        let s_beta = array![[2.0, 0.3], [0.3, 1.0]];
        let v = nie_variance(
            theta_t.view(),
            array![0.0, 0.0].view(),
            Array2::eye(2).view(),
            s_beta.view(),
            2.0,
        );
        assert!((v - 4.0 * theta_t.dot(&s_beta.dot(&theta_t))).abs() < 1e-14);
    }

    #[test]
    fn equal_levels_give_zero_effects() {
        let (out, med) = fits(1);
        let e = estimate_effects(&out, &med, Contrast::new(1.0, 1.0), 0.05, 1).unwrap();
        for est in e.iter() {
            assert_eq!(est.point, 0.0);
            assert_eq!(est.sigma2, 0.0);
        }
    }

    #[test]
    fn total_is_sum_and_ci_contains_point() {
        let (out, med) = fits(2);
        let e = estimate_effects(&out, &med, Contrast::new(2.0, -0.5), 0.1, 1).unwrap();
        assert!((e.total.point - e.nde.point - e.nie.point).abs() <= 1e-12);
        assert!((e.total.sigma2 - e.nde.sigma2 - e.nie.sigma2).abs() <= 1e-12);
        let z = normal_quantile(0.1);
        for est in e.iter() {
            assert!(est.ci_low <= est.point && est.point <= est.ci_high);
            assert!((est.half_width() - z * (est.sigma2 / 80.0).sqrt()).abs() < 1e-12);
        }
        assert!((e.nde.point - 2.5 * out.beta[1]).abs() < 1e-14);
    }

    #[test]
    fn sigma_theta_t_matches_loop() {
        let (_, med) = fits(3);
        let s = sigma_theta_t(&med, 1);
        let q = med.q;
        for a in 0..med.d {
            for b in 0..med.d {
                assert_eq!(s[[a, b]], med.sigma_theta[[a * q + 1, b * q + 1]]);
            }
        }
    }

    #[test]
    fn nde_ignores_mediator_fit() {
        let (out, med) = fits(4);
        let (_, other) = fits(5);
        let a = estimate_effects(&out, &med, Contrast::default(), 0.05, 1).unwrap();
        let b = estimate_effects(&out, &other, Contrast::default(), 0.05, 1).unwrap();
        assert_eq!(a.nde, b.nde);
    }

    #[test]
    fn rotation_check_identity_and_random() {
        let (out, med) = fits(6);
        let id = rotation_invariance_check(&out, &med, Array2::eye(3).view(), Contrast::default(), 0.05, 1).unwrap();
        assert!(id.max_deviation() < 1e-12);
        let perm = array![[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]];
        let p = rotation_invariance_check(&out, &med, perm.view(), Contrast::default(), 0.05, 1).unwrap();
        assert!(p.passes(1e-10));
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let q = random_orthogonal(3, &mut rng);
            let r = rotation_invariance_check(&out, &med, q.view(), Contrast::default(), 0.05, 1).unwrap();
            assert!(r.passes(1e-8), "{r:?}");
        }
        let bad = rotation_invariance_check(&out, &med, (Array2::eye(3) * 2.0).view(), Contrast::default(), 0.05, 1);
        assert!(matches!(bad, Err(Error::Input(_))));
    }

    #[test]
    fn argument_validation() {
        let (out, med) = fits(8);
        assert!(estimate_effects(&out, &med, Contrast::default(), 1.0, 1).is_err());
        assert!(estimate_effects(&out, &med, Contrast::default(), 0.05, 3).is_err());
    }

    #[test]
    fn single_dimension_curve_matches_direct_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = gaussian_matrix(40, 40, &mut rng);
        let a = AdjacencyMatrix::new(&g + &g.t()).unwrap();
        let (w, _, y) = instance(10, 40, 1, 2);
        let opts = MediationOptions::default();
        let curve = sensitivity_curve(&a, w.view(), y.view(), 3, 3, &opts).unwrap();
        assert_eq!(curve.len(), 1);
        let report = mediate(&a, w.view(), y.view(), 3, &opts, &[]).unwrap();
        let row = curve[0].effects.unwrap();
        assert!((row.nie.point - report.nie.point).abs() < 1e-10);
        assert!((row.nde.sigma2 - report.nde.sigma2).abs() < 1e-10);
        assert!(report.rotation_check.passes(1e-8));
        assert_eq!(report.outcome.len(), 3 + 3);
        assert_eq!(report.mediator.len(), 3);
        assert!(sensitivity_curve(&a, w.view(), y.view(), 4, 3, &opts).is_err());
    }

    #[test]
    fn collinear_dimension_is_flagged_not_fatal() {
        // the leading eigenvector of a rank-one network with constant degree is the intercept
        let a = AdjacencyMatrix::new(Array2::ones((20, 20))).unwrap();
        let (w, _, y) = instance(11, 20, 0, 1);
        let curve = sensitivity_curve(&a, w.view(), y.view(), 1, 1, &MediationOptions::default()).unwrap();
        assert!(curve[0].effects.is_none());
        assert!(curve[0].error.as_deref().unwrap().contains("collinear"));
    }

    #[test]
    fn misaligned_inputs_rejected() {
        let a = AdjacencyMatrix::new(Array2::eye(5)).unwrap();
        let w = Array2::ones((4, 2));
        let y = Array1::zeros(4);
        assert!(matches!(
            mediate(&a, w.view(), y.view(), 1, &MediationOptions::default(), &[]),
            Err(Error::Dimension(_))
        ));
    }
}
