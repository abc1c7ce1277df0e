//! Coverage when the embedding dimension is wrong: too small breaks it, too large does not.

use netmed::mediation::EffectKind;
use netmed::models::CovariateModel;
use netmed::sim::{misspecification_sweep, SimScenario};

fn main() -> netmed::Result<()> {
    let reps = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(40);
    let scenario = SimScenario {
        n_grid: vec![800],
        d_fit: (1..=7).collect(),
        reps,
        ..SimScenario::new(CovariateModel::Informative, 4)
    };
    let report = misspecification_sweep(&scenario)?;
    println!("true d = 4, n = 800, {reps} reps");
    println!(
        "{:>5} {:>8} {:>8} {:>9} {:>9}",
        "d_fit", "cov_nde", "cov_nie", "bias_nde", "bias_nie"
    );
    for c in &report.cells {
        println!(
            "{:>5} {:>8.2} {:>8.2} {:>9.3} {:>9.3}",
            c.d_fit, c.coverage_nde, c.coverage_nie, c.bias_nde, c.bias_nie
        );
    }
    for d in 5..=7 {
        let (diff, se) = report.paired_bias_difference(800, d, 4, EffectKind::Nie).unwrap();
        println!(
            "nie bias shift at d_fit = {d}: {diff:.4} ({:.1} standard errors)",
            diff.abs() / se
        );
    }
    Ok(())
}
