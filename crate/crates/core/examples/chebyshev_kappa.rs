//! Rank-Chebyshev complexity of a few shapes across tolerances.

use std::f64::consts::PI;

use rankprune::analysis::{chebyshev_sweep, kappa_from_sweep, sample_on_grid, DEFAULT_D_MAX, DEFAULT_GRID};

type Shape = (&'static str, fn(f64) -> f64);

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let shapes: [Shape; 5] = [
        ("constant", |_| 0.5),
        ("linear", |t| t),
        ("bump 0.7", |t| (-0.5 * ((t - 0.7) / 0.05f64).powi(2)).exp()),
        ("sin(10 pi t)", |t| (10.0 * PI * t).sin()),
        ("sin(50 pi t)", |t| (50.0 * PI * t).sin()),
    ];
    let eps = [0.2, 0.1, 0.05, 0.01];
    print!("{:<14}", "shape");
    for e in eps {
        print!("{:>8}", format!("e={e}"));
    }
    println!();
    for (name, f) in shapes {
        let sweep = chebyshev_sweep(&sample_on_grid(DEFAULT_GRID, f), DEFAULT_D_MAX)?;
        print!("{name:<14}");
        for e in eps {
            let k = kappa_from_sweep(&sweep, e);
            print!("{:>8}", k.d.map_or("inf".to_string(), |d| d.to_string()));
        }
        println!();
    }
    Ok(())
}
