//! Probe-then-prune on the surrogate, with and without boundary interaction.
//!
//! cargo run --release --example adaptive_pruner

use rankprune::adaptive::{adaptive_prune, AdaptiveConfig};
use rankprune::oracle::SurrogateConfig;
use rankprune::{Seed, Sparsity};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = AdaptiveConfig::default();
    for lambda in [0.0, 0.3] {
        let mut oracle = SurrogateConfig::default().with_lambda(lambda).build()?;
        println!("lambda = {lambda}");
        for s in [0.5, 0.6, 0.7, 0.8] {
            let out = adaptive_prune(&mut oracle, Sparsity::new(s)?, &config, Seed(0))?;
            let r = &out.report;
            println!(
                "  S={s}: probes {:.4}/{:.4}/{:.4}  d_env={:+.4} d_raw={:+.4}  -> {}  heldout {:.4}  ({} evals)",
                r.plateau_acc,
                r.envelope_acc,
                r.raw_acc,
                r.delta_env,
                r.delta_raw,
                out.kappa_hat,
                out.heldout_acc.unwrap_or(f64::NAN),
                r.total_evaluations
            );
        }
    }
    Ok(())
}
