//! A small variant x sparsity x seed grid on the surrogate, resumed once,
//! then analyzed into report.json, report.txt and plot.csv.
//!
//! cargo run --release --example surrogate_grid -- [out_dir]

use rankprune::dbo::OptimizerConfig;
use rankprune::experiment::{analyze_dir, run_experiment, ExperimentConfig, RunOptions, VariantRef};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .map(Into::into)
        .unwrap_or_else(|| std::env::temp_dir().join("rankprune-grid"));
    let config = ExperimentConfig {
        variants: ["V1a", "RandomSpline", "V1", "A5", "NL_sin"]
            .iter()
            .map(|n| VariantRef::Preset(n.to_string()))
            .collect(),
        sparsities: vec![0.5, 0.7],
        seeds: vec![0, 1],
        dbo: OptimizerConfig {
            population: 20,
            iterations: 10,
            ..OptimizerConfig::default()
        },
        out_dir: out,
        jobs: 4,
        ..ExperimentConfig::default()
    };
    let first = run_experiment(&config, RunOptions::default())?;
    println!("first run: {first:?}");
    let second = run_experiment(&config, RunOptions::default())?;
    println!("resumed:   {second:?}");

    let (report, written) = analyze_dir(&config.out_dir, &config.class_map()?)?;
    print!("{}", report.text_tables());
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}
