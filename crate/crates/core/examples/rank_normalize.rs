//! Rank min-max normalization is blind to any strictly increasing transform
//! of the magnitudes, so Top-K selections on it cannot change.

use rankprune::profile::{validate_profile, LayerDocument, ProfileDocument};
use rankprune::ranknorm::{allocate_budgets, rank_mm};
use rankprune::Sparsity;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let magnitude = vec![0.3, 2.0, 0.7, 0.7, 5.0, 1.1];
    let doc = |m: Vec<f64>| ProfileDocument {
        layers: vec![LayerDocument {
            layer_id: "fc1".into(),
            taylor: vec![1.0; m.len()],
            magnitude: m,
        }],
    };
    let a = validate_profile(doc(magnitude.clone()))?;
    let b = validate_profile(doc(magnitude.iter().map(|m| m.exp() * 3.0).collect()))?;

    let ra = rank_mm(&a);
    let rb = rank_mm(&b);
    println!("magnitudes    {magnitude:?}");
    println!("rank-MM       {:?}", ra.layer("fc1").unwrap());
    println!("after 3*exp() {:?}", rb.layer("fc1").unwrap());
    assert_eq!(ra, rb);

    let budgets = allocate_budgets(&a, Sparsity::new(0.5)?)?;
    println!("keep at S=0.5: {}", budgets.get("fc1").unwrap());
    Ok(())
}
