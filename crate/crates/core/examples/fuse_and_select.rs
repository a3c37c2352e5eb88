//! Fuse Taylor scores with two features and take per-layer Top-K.

use rankprune::features::{FeatureSpec, OrbitStat};
use rankprune::fusion::FusionWeights;
use rankprune::oracle::{Oracle, SurrogateConfig};
use rankprune::search::{features_for, Scorer};
use rankprune::{Seed, Sparsity};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let oracle = SurrogateConfig {
        layers: 2,
        channels: 200,
        ..SurrogateConfig::default()
    }
    .build()?;
    let profile = oracle.profile().clone();
    let specs = [
        FeatureSpec::orbit(OrbitStat::Peak, true),
        FeatureSpec::orbit(OrbitStat::Var, true),
    ];
    let features = features_for(&profile, &specs, Seed(0))?;
    let scorer = Scorer::new(&profile, &features, Sparsity::new(0.7)?, (-40.0, 40.0))?;
    for b in scorer.budgets().iter() {
        println!("budget {}: {}", b.0, b.1);
    }

    for weights in [
        FusionWeights::ones(2),
        FusionWeights::new(1.0, vec![0.0, 0.0], (-40.0, 40.0))?,
        FusionWeights::new(0.5, vec![-3.0, 8.0], (-40.0, 40.0))?,
    ] {
        let selection = scorer.select(&weights)?;
        println!(
            "w_t={:+} w={:?}: surrogate accuracy {:.4}, first kept {:?}",
            weights.w_t,
            weights.w,
            oracle.accuracy(&selection)?,
            &selection.layer("block0").unwrap()[..6]
        );
    }
    Ok(())
}
