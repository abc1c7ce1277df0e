//! Direct and indirect effects on a simulated network with known truth.

use netmed::embedding::Side;
use netmed::mediation::{mediate, MediationOptions};
use netmed::models::{simulate_scenario, CovariateModel};

fn main() -> netmed::Result<()> {
    let draw = simulate_scenario(CovariateModel::Informative, 1000, 3, 21)?;
    let opts = MediationOptions {
        side: Some(Side::Symmetric),
        ..MediationOptions::default()
    };
    let names = vec!["intercept".into(), "block1".into(), "block2".into()];
    let report = mediate(&draw.a, draw.w.view(), draw.y.view(), 3, &opts, &names)?;

    for (e, truth) in [(&report.nde, draw.nde_true), (&report.nie, draw.nie_true)] {
        println!(
            "{}: {:.3} (95% CI {:.3} to {:.3}), truth {truth:.3}",
            e.kind, e.point, e.ci_low, e.ci_high
        );
    }
    println!("total: {:.3}", report.total.point);
    println!(
        "rotation check deviation: {:.1e}",
        report.rotation_check.max_deviation()
    );
    for c in &report.outcome {
        println!("  {:>10} {:>8.3} ({:.3})", c.name, c.estimate, c.std_error);
    }
    Ok(())
}
