//! Every feature kind on one 1536-channel layer, with its Spearman
//! correlation to rank and its isotonic residual energy.

use rankprune::analysis::magnitude_independence_report;
use rankprune::features::{build_feature, spearman};
use rankprune::ranknorm::RankMap;
use rankprune::variants::battery;
use rankprune::Seed;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = RankMap::uniform(1536);
    let ranks = grid.flat();
    println!("{:<16} {:<22} {:>8} {:>10}", "variant", "feature", "rho", "resid");
    for variant in battery() {
        for spec in &variant.features {
            let col = build_feature(&grid, spec, Seed(0))?;
            let rho = spearman(&col, &ranks)?.rho;
            let report = magnitude_independence_report(&col, &ranks)?;
            println!(
                "{:<16} {:<22} {:>+8.3} {:>10.4}",
                variant.name,
                spec.name(),
                rho,
                report.residual_energy_fraction
            );
        }
    }
    Ok(())
}
