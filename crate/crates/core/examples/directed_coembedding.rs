//! Sending and receiving positions of a directed network.

use ndarray::Array2;
use netmed::embedding::coembed;
use netmed::linalg::max_abs_diff;
use netmed::network::AdjacencyMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> netmed::Result<()> {
    // senders in the first half mostly nominate the second half; the reverse is rare
    let n = 200;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let a = Array2::from_shape_fn((n, n), |(i, j)| {
        let p = match (i < n / 2, j < n / 2) {
            (true, false) => 0.3,
            (false, true) => 0.02,
            _ => 0.1,
        };
        f64::from(u8::from(i != j && rng.random::<f64>() < p))
    });
    let a = AdjacencyMatrix::new(a)?;
    println!("network kind: {:?}", a.kind());

    let (left, right) = coembed(&a, 2)?;
    let gram_gap = max_abs_diff(left.gram().view(), right.gram().view());
    println!("singular values {:.2}", left.singular_values());
    println!("sending and receiving grams differ by up to {gram_gap:.3}");
    let mean_norm = |e: &netmed::embedding::Embedding, lo: usize, hi: usize| {
        (lo..hi)
            .map(|i| e.positions().row(i).dot(&e.positions().row(i)).sqrt())
            .sum::<f64>()
            / (hi - lo) as f64
    };
    println!(
        "first half: sending {:.3}, receiving {:.3}",
        mean_norm(&left, 0, n / 2),
        mean_norm(&right, 0, n / 2)
    );
    println!(
        "second half: sending {:.3}, receiving {:.3}",
        mean_norm(&left, n / 2, n),
        mean_norm(&right, n / 2, n)
    );
    Ok(())
}
