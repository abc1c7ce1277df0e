//! Generative network models and the simulation scenarios built on them.

pub mod latent;
pub mod sampler;
pub mod scenario;

pub use latent::{constant_mixing, gram, latent_from_blocks, LatentConfig};
pub use sampler::{sample_network, sample_network_with, NoiseFamily, ProbabilityPolicy, SubGammaNoise};
pub use scenario::{
    replicate_rng, sample_beta, simulate_scenario, simulate_with, CovariateModel, DegreePolicy, NullMode,
    ScenarioConfig, ScenarioDraw, TREATMENT_INDEX,
};
