//! Varimax-rotated row embedding of a bipartite network (people by groups).

use ndarray::Array2;
use netmed::embedding::{embed_with, Side};
use netmed::linalg::varimax_criterion;
use netmed::network::AdjacencyMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> netmed::Result<()> {
    let (people, groups, k) = (300, 60, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let a = Array2::from_shape_fn((people, groups), |(i, j)| {
        let p = if i % k == j % k { 0.35 } else { 0.02 };
        f64::from(u8::from(rng.random::<f64>() < p))
    });
    let a = AdjacencyMatrix::bipartite(a)?;

    let plain = embed_with(&a, k, Side::Left, false)?;
    let rotated = embed_with(&a, k, Side::Left, true)?;
    println!(
        "varimax criterion: {:.3e} before, {:.3e} after",
        varimax_criterion(plain.unscaled().view()),
        varimax_criterion(rotated.unscaled().view())
    );
    for i in 0..6 {
        println!("person {i} (group type {}): {:.3}", i % k, rotated.positions().row(i));
    }
    Ok(())
}
