//! The simulation data-generating process: degree-corrected blockmodel, covariates, and outcome.

use std::fmt;
use std::str::FromStr;

use ndarray::{s, Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StudentT, Uniform};
use serde::{Deserialize, Serialize};

use super::latent::{constant_mixing, latent_from_blocks, LatentConfig};
use super::sampler::{sample_network_with, ProbabilityPolicy, SubGammaNoise};
use crate::error::{Error, Result};
use crate::linalg::gaussian_matrix;
use crate::network::AdjacencyMatrix;
use crate::regression::LeastSquares;

/// Column of `W` holding the treatment in both covariate models.
pub const TREATMENT_INDEX: usize = 1;

pub const WITHIN_BLOCK: f64 = 0.8;
pub const BETWEEN_BLOCK: f64 = 0.03;
const GAMMA_RANGE: (f64, f64) = (1.0, 3.0);
const UNINFORMATIVE_COLUMNS: usize = 3;
const STUDENT_DF: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovariateModel {
    /// Dummy-coded block indicators; treatment is the second block's indicator.
    Informative,
    /// Three iid standard normal columns independent of the network.
    Uninformative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NullMode {
    #[default]
    None,
    /// `β_t = 0`.
    ZeroNde,
    /// `β_x = 0`.
    ZeroNie,
}

/// Keeps Bernoulli probabilities valid when `γ ∈ [1, 3]` would push them above one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DegreePolicy {
    /// Divide `γ` by its maximum, so every probability is at most the largest entry of `B`.
    #[default]
    Rescale,
    /// Keep `γ` and clamp probabilities at one when sampling.
    Clip,
}

macro_rules! lowercase_enum {
    ($ty:ident { $($variant:ident => $name:literal),+ $(,)? }) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($ty::$variant => $name),+ })
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s.trim().to_ascii_lowercase().as_str() {
                    $($name => Ok($ty::$variant),)+
                    other => Err(Error::Input(format!(
                        concat!("unknown ", stringify!($ty), " '{}' (expected one of: {})"),
                        other,
                        [$($name),+].join(", ")
                    ))),
                }
            }
        }
    };
}

lowercase_enum!(CovariateModel { Informative => "informative", Uninformative => "uninformative" });
lowercase_enum!(NullMode { None => "none", ZeroNde => "zero_nde", ZeroNie => "zero_nie" });
lowercase_enum!(DegreePolicy { Rescale => "rescale", Clip => "clip" });

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub model: CovariateModel,
    pub n: usize,
    /// Number of blocks, which is also the latent dimension.
    pub d: usize,
    pub null_mode: NullMode,
    pub degree_policy: DegreePolicy,
}

impl ScenarioConfig {
    pub fn new(model: CovariateModel, n: usize, d: usize) -> Self {
        ScenarioConfig {
            model,
            n,
            d,
            null_mode: NullMode::None,
            degree_policy: DegreePolicy::Rescale,
        }
    }

    pub fn with_null_mode(mut self, null_mode: NullMode) -> Self {
        self.null_mode = null_mode;
        self
    }

    pub fn with_degree_policy(mut self, policy: DegreePolicy) -> Self {
        self.degree_policy = policy;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::Input(format!(
                "scenario needs at least 2 blocks, got {}",
                self.d
            )));
        }
        if self.n < 8 * self.d {
            return Err(Error::Input(format!(
                "scenario needs n >= 8d (n = {}, d = {})",
                self.n, self.d
            )));
        }
        Ok(())
    }

    /// Columns of `W`.
    pub fn q(&self) -> usize {
        match self.model {
            CovariateModel::Informative => self.d,
            CovariateModel::Uninformative => UNINFORMATIVE_COLUMNS + 1,
        }
    }
}

/// One complete simulated dataset with its ground truth.
#[derive(Debug, Clone)]
pub struct ScenarioDraw {
    pub a: AdjacencyMatrix,
    /// True latent positions, `XXᵀ = E[A]` under [`DegreePolicy::Rescale`].
    pub x: Array2<f64>,
    /// Design `[1, T, C]`.
    pub w: Array2<f64>,
    pub y: Array1<f64>,
    /// Least-squares projection of `X` on `W` for this sample, `q × d`.
    pub theta_true: Array2<f64>,
    /// `[β_w; β_x]`.
    pub beta_true: Array1<f64>,
    pub nde_true: f64,
    pub nie_true: f64,
    pub blocks: Vec<usize>,
    pub gamma: Array1<f64>,
    pub treatment_index: usize,
}

impl ScenarioDraw {
    pub fn beta_x_true(&self) -> ndarray::ArrayView1<'_, f64> {
        self.beta_true.slice(s![self.w.ncols()..])
    }
}

pub fn simulate_scenario(model: CovariateModel, n: usize, d: usize, seed: u64) -> Result<ScenarioDraw> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    simulate_with(&ScenarioConfig::new(model, n, d), &mut rng)
}

pub fn simulate_with<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Result<ScenarioDraw> {
    cfg.validate()?;
    let (n, d) = (cfg.n, cfg.d);

    let blocks: Vec<usize> = (0..n).map(|_| rng.random_range(0..d)).collect();
    let uniform = Uniform::new(GAMMA_RANGE.0, GAMMA_RANGE.1).map_err(|e| Error::Input(e.to_string()))?;
    let mut gamma = Array1::from_shape_simple_fn(n, || uniform.sample(rng));
    if cfg.degree_policy == DegreePolicy::Rescale {
        let top = gamma.fold(0.0f64, |m, &g| m.max(g));
        gamma /= top;
    }
    let latent = LatentConfig::from_labels(&blocks, constant_mixing(d, WITHIN_BLOCK, BETWEEN_BLOCK), gamma.clone())?;
    let x = latent_from_blocks(&latent)?;

    let w = match cfg.model {
        CovariateModel::Informative => {
            // treatment coding with block 0 as reference: W = [1, 1{block 1}, ..., 1{block d-1}]
            Array2::from_shape_fn((n, d), |(i, j)| if j == 0 || blocks[i] == j { 1.0 } else { 0.0 })
        }
        CovariateModel::Uninformative => {
            let mut w = Array2::ones((n, UNINFORMATIVE_COLUMNS + 1));
            w.slice_mut(s![.., 1..])
                .assign(&gaussian_matrix(n, UNINFORMATIVE_COLUMNS, rng));
            w
        }
    };

    let a = sample_network_with(x.view(), SubGammaNoise::bernoulli(), ProbabilityPolicy::Clip, rng)?;

    let q = w.ncols();
    let theta_true = LeastSquares::new(w.view())?.solve(x.view());
    let mut beta_true = sample_beta(q + d, rng);
    match cfg.null_mode {
        NullMode::None => {}
        NullMode::ZeroNde => beta_true[TREATMENT_INDEX] = 0.0,
        NullMode::ZeroNie => beta_true.slice_mut(s![q..]).fill(0.0),
    }

    let t5 = StudentT::new(STUDENT_DF).map_err(|e| Error::Input(e.to_string()))?;
    let eps = Array1::from_shape_simple_fn(n, || t5.sample(rng));
    let beta_x = beta_true.slice(s![q..]);
    let y = w.dot(&beta_true.slice(s![..q])) + x.dot(&beta_x) + eps;

    let nde_true = beta_true[TREATMENT_INDEX];
    let nie_true = theta_true.row(TREATMENT_INDEX).dot(&beta_x);

    Ok(ScenarioDraw {
        a,
        x,
        w,
        y,
        theta_true,
        beta_true,
        nde_true,
        nie_true,
        blocks,
        gamma,
        treatment_index: TREATMENT_INDEX,
    })
}

/// `β ~ N(1, I/4)`.
pub fn sample_beta<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Array1<f64> {
    let normal = Normal::new(1.0, 0.5).expect("valid normal parameters");
    Array1::from_shape_simple_fn(len, || normal.sample(rng))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent stream for replicate `rep` of cell `cell`, independent of execution order.
pub fn replicate_rng(master_seed: u64, cell: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(master_seed ^ splitmix64(cell)));
    rng.set_stream(rep);
    rng
}

/// Mean squared entry of the non-intercept rows of `Θ`.
pub fn association_strength(theta: &Array2<f64>) -> f64 {
    let rest = theta.slice(s![1.., ..]);
    rest.mapv(|v| v * v).mean().unwrap_or(0.0)
}
