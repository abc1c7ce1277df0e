//! Coverage and error of the effect estimators over a grid of sample sizes.
//!
//! `cargo run --release --example coverage_study -- [informative|uninformative] [blocks] [reps] [n...]`

use std::time::Instant;

use netmed::mediation::EffectKind;
use netmed::models::CovariateModel;
use netmed::sim::{mse_slope, run_scenario, SimScenario};

fn main() -> netmed::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let model: CovariateModel = args.first().map_or(Ok(CovariateModel::Informative), |s| s.parse())?;
    let blocks = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(2);
    let reps = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(50);
    let n_grid: Vec<usize> = args.iter().skip(3).filter_map(|s| s.parse().ok()).collect();

    let mut scenario = SimScenario::new(model, blocks);
    scenario.reps = reps;
    if !n_grid.is_empty() {
        scenario.n_grid = n_grid;
    }

    let start = Instant::now();
    let report = run_scenario(&scenario)?;
    println!("{model}, {blocks} blocks, {reps} reps ({:.1?})", start.elapsed());
    println!(
        "{:>6} {:>9} {:>9} {:>8} {:>8} {:>9} {:>9}",
        "n", "cov_nde", "cov_nie", "mse_nde", "mse_nie", "theta_l1", "beta_l1"
    );
    for c in &report.cells {
        println!(
            "{:>6} {:>9.3} {:>9.3} {:>8.4} {:>8.4} {:>9.4} {:>9.4}",
            c.n,
            c.coverage_nde,
            c.coverage_nie,
            c.mse_nde,
            c.mse_nie,
            c.theta_err.unwrap_or(f64::NAN),
            c.beta_err.unwrap_or(f64::NAN)
        );
    }
    if report.cells.len() >= 3 {
        for kind in [EffectKind::Nde, EffectKind::Nie] {
            println!("log-log MSE slope ({kind}): {:.3}", mse_slope(&report, blocks, kind)?);
        }
    }
    Ok(())
}
