use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::ensure_finite;
use crate::network::AdjacencyMatrix;

/// Probabilities may leave `[0, 1]` by this much from rounding before [`ProbabilityPolicy::Strict`] rejects them.
pub const PROBABILITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseFamily {
    /// `A_ij ~ Bernoulli(P_ij)`.
    Bernoulli,
    /// `A_ij = P_ij + N(0, ν)`.
    Gaussian,
    /// `A = P`.
    None,
}

/// Edge-noise law with its sub-gamma parameters `(ν, b)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubGammaNoise {
    pub family: NoiseFamily,
    pub nu: f64,
    pub b: f64,
}

impl SubGammaNoise {
    pub fn bernoulli() -> Self {
        SubGammaNoise {
            family: NoiseFamily::Bernoulli,
            nu: 0.25,
            b: 0.0,
        }
    }

    /// Gaussian noise with variance `nu`.
    pub fn gaussian(nu: f64) -> Self {
        SubGammaNoise {
            family: NoiseFamily::Gaussian,
            nu,
            b: 0.0,
        }
    }

    pub fn none() -> Self {
        SubGammaNoise {
            family: NoiseFamily::None,
            nu: 0.0,
            b: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("nu", self.nu), ("b", self.b)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Input(format!(
                    "noise parameter {name} must be finite and nonnegative, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// What to do with Bernoulli probabilities outside `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbabilityPolicy {
    /// Reject anything beyond [`PROBABILITY_TOL`].
    #[default]
    Strict,
    /// Clamp to `[0, 1]`.
    Clip,
}

pub fn sample_network(
    x: ArrayView2<'_, f64>,
    noise: SubGammaNoise,
    policy: ProbabilityPolicy,
    seed: u64,
) -> Result<AdjacencyMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_network_with(x, noise, policy, &mut rng)
}

/// Symmetric `A` with independent upper-triangular entries (diagonal included) and
/// `E[A | X] = XXᵀ`.
pub fn sample_network_with<R: Rng + ?Sized>(
    x: ArrayView2<'_, f64>,
    noise: SubGammaNoise,
    policy: ProbabilityPolicy,
    rng: &mut R,
) -> Result<AdjacencyMatrix> {
    ensure_finite(x, "latent positions")?;
    noise.validate()?;
    let p = x.dot(&x.t());
    let n = p.nrows();
    let mut a = Array2::zeros((n, n));
    match noise.family {
        NoiseFamily::None => a.assign(&p),
        NoiseFamily::Gaussian => {
            let normal = Normal::new(0.0, noise.nu.sqrt()).map_err(|e| Error::Input(e.to_string()))?;
            for i in 0..n {
                for j in i..n {
                    let v = p[[i, j]] + normal.sample(rng);
                    a[[i, j]] = v;
                    a[[j, i]] = v;
                }
            }
        }
        NoiseFamily::Bernoulli => {
            for i in 0..n {
                for j in i..n {
                    let prob = bernoulli_probability(p[[i, j]], policy, i, j)?;
                    if rng.random::<f64>() < prob {
                        a[[i, j]] = 1.0;
                        a[[j, i]] = 1.0;
                    }
                }
            }
        }
    }
    AdjacencyMatrix::undirected(a)
}

fn bernoulli_probability(p: f64, policy: ProbabilityPolicy, i: usize, j: usize) -> Result<f64> {
    if policy == ProbabilityPolicy::Strict && !(-PROBABILITY_TOL..=1.0 + PROBABILITY_TOL).contains(&p) {
        return Err(Error::Model(format!(
            "edge probability P[{i},{j}] = {p} is outside [0, 1]"
        )));
    }
    Ok(p.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn upper(a: &Array2<f64>) -> Vec<f64> {
        let n = a.nrows();
        (0..n)
            .flat_map(|i| (i..n).map(move |j| (i, j)))
            .map(|(i, j)| a[[i, j]])
            .collect()
    }

    #[test]
    fn zero_positions_give_empty_graph() {
        let x = Array2::zeros((10, 2));
        let a = sample_network(x.view(), SubGammaNoise::bernoulli(), ProbabilityPolicy::Strict, 1).unwrap();
        assert!(a.matrix().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_probability_density() {
        let x = Array2::from_elem((400, 1), 0.5f64.sqrt());
        let a = sample_network(x.view(), SubGammaNoise::bernoulli(), ProbabilityPolicy::Strict, 2).unwrap();
        let u = upper(a.matrix());
        let density = u.iter().sum::<f64>() / u.len() as f64;
        assert!((density - 0.5).abs() <= 0.01, "density {density}");
        assert_eq!(a.matrix(), &a.matrix().t().to_owned());
    }

    #[test]
    fn gaussian_noise_moments() {
        let x = Array2::from_shape_fn((200, 2), |(i, j)| 0.3 + 0.1 * ((i + j) % 3) as f64);
        let a = sample_network(x.view(), SubGammaNoise::gaussian(0.04), ProbabilityPolicy::Strict, 3).unwrap();
        let p = x.dot(&x.t());
        let resid = upper(&(a.matrix() - &p));
        let m = resid.iter().sum::<f64>() / resid.len() as f64;
        let v = resid.iter().map(|r| (r - m).powi(2)).sum::<f64>() / resid.len() as f64;
        assert!(m.abs() < 0.01);
        assert!((v - 0.04).abs() <= 0.004, "variance {v}");
    }

    #[test]
    fn conditional_unbiasedness() {
        let n = 40;
        let x = Array2::from_shape_fn((n, 2), |(i, j)| if (i % 2) == j { 0.8 } else { 0.2 });
        let p = x.dot(&x.t());
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut mean = Array2::<f64>::zeros((n, n));
        for _ in 0..200 {
            mean += sample_network_with(
                x.view(),
                SubGammaNoise::bernoulli(),
                ProbabilityPolicy::Strict,
                &mut rng,
            )
            .unwrap()
            .matrix();
        }
        mean /= 200.0;
        let worst = (&mean - &p).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(worst <= 5.0 * (0.25f64 / 200.0).sqrt());
    }

    #[test]
    fn out_of_range_probabilities() {
        let x = Array2::from_elem((3, 1), 1.2);
        let strict = sample_network(x.view(), SubGammaNoise::bernoulli(), ProbabilityPolicy::Strict, 5);
        assert!(matches!(strict, Err(Error::Model(_))));
        let clipped = sample_network(x.view(), SubGammaNoise::bernoulli(), ProbabilityPolicy::Clip, 5).unwrap();
        assert!(clipped.matrix().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn noise_parameters_validated() {
        let x = Array2::<f64>::zeros((2, 1));
        let bad = SubGammaNoise::gaussian(-1.0);
        assert!(sample_network(x.view(), bad, ProbabilityPolicy::Strict, 0).is_err());
        let none = sample_network(
            Array2::from_elem((2, 1), 2.0).view(),
            SubGammaNoise::none(),
            ProbabilityPolicy::Strict,
            0,
        );
        assert_eq!(none.unwrap().matrix().sum(), 16.0);
    }

    #[test]
    fn seeded_sampling_is_reproducible() {
        let x = Array2::from_elem((30, 1), 0.6);
        let a = sample_network(x.view(), SubGammaNoise::bernoulli(), ProbabilityPolicy::Strict, 9).unwrap();
        let b = sample_network(x.view(), SubGammaNoise::bernoulli(), ProbabilityPolicy::Strict, 9).unwrap();
        assert_eq!(a, b);
    }
}
