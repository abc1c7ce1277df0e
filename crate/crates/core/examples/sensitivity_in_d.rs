//! Effects as a function of the embedding dimension; estimates settle once d reaches the truth.

use netmed::mediation::{sensitivity_curve, MediationOptions};
use netmed::models::{simulate_scenario, CovariateModel};

fn main() -> netmed::Result<()> {
    let draw = simulate_scenario(CovariateModel::Informative, 1200, 4, 5)?;
    println!("truth: nde {:.3}, nie {:.3}", draw.nde_true, draw.nie_true);
    let rows = sensitivity_curve(
        &draw.a,
        draw.w.view(),
        draw.y.view(),
        1,
        8,
        &MediationOptions::default(),
    )?;
    println!("{:>3} {:>8} {:>8}", "d", "nde", "nie");
    for row in rows {
        match row.effects {
            Some(e) => println!("{:>3} {:>8.3} {:>8.3}", row.d, e.nde.point, e.nie.point),
            None => println!("{:>3} failed: {}", row.d, row.error.unwrap_or_default()),
        }
    }
    Ok(())
}
