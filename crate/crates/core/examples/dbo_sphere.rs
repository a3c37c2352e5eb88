//! The Dung Beetle Optimizer on the 5-D sphere with the default budget.

use rankprune::dbo::{optimize, OptimizerConfig};
use rankprune::Seed;

fn main() {
    for seed in 0..5 {
        let config = OptimizerConfig::default().with_seed(Seed(seed));
        let result = optimize(
            |x: &[f64]| Ok::<_, std::convert::Infallible>(x.iter().map(|v| v * v).sum()),
            5,
            &config,
        )
        .unwrap();
        println!(
            "seed {seed}: best {:.3e} after {} evaluations (roles {:?})",
            result.best_fitness,
            result.evaluations,
            config.role_sizes()
        );
    }
}
