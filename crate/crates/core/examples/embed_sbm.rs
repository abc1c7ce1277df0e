//! Embed a sampled three-block network and compare the estimate with the true positions.

use ndarray::Array1;
use netmed::embedding::ase;
use netmed::linalg::{procrustes, two_to_infinity};
use netmed::models::{
    constant_mixing, latent_from_blocks, sample_network, LatentConfig, ProbabilityPolicy, SubGammaNoise,
};

fn main() -> netmed::Result<()> {
    let n = 600;
    let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
    let cfg = LatentConfig::from_labels(&labels, constant_mixing(3, 0.4, 0.05), Array1::ones(n))?;
    let x = latent_from_blocks(&cfg)?;
    let a = sample_network(x.view(), SubGammaNoise::bernoulli(), ProbabilityPolicy::Strict, 3)?;

    let xhat = ase(&a, 3)?;
    println!("top singular values: {:.2}", xhat.singular_values());
    let q = procrustes(xhat.positions().view(), x.view())?;
    let err = two_to_infinity((xhat.positions().dot(&q) - &x).view());
    println!("largest row error after alignment: {err:.4}");

    for block in 0..3 {
        let rows: Vec<usize> = (0..n).filter(|&i| labels[i] == block).collect();
        let mean = rows
            .iter()
            .fold(Array1::<f64>::zeros(3), |acc, &i| acc + xhat.positions().row(i).dot(&q))
            / rows.len() as f64;
        println!("block {block} centre {:.3}", mean);
    }
    Ok(())
}
