//! Plateau statistics, escape deltas, the three-way regime verdict,
//! magnitude-independence diagnostics and rank-Chebyshev complexity.

mod chebyshev;
mod report;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{isotonic_residual, spearman, FeatureError};
use crate::profile::Seed;

pub use chebyshev::{
    chebyshev_kappa, chebyshev_sweep, kappa_from_sweep, sample_on_grid, ChebyshevComplexity, DEFAULT_D_MAX,
    DEFAULT_EPSILON, DEFAULT_GRID,
};
pub use report::{
    build_report, AnalysisReport, ClassBest, ClassDeltas, ClassMap, ExpectedZone, PlateauRow, RegimeReport,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("need at least {needed} entries, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("grid of {points} points is too coarse for d_max = {d_max} (need 4 * d_max)")]
    GridTooCoarse { points: usize, d_max: usize },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: Seed,
    pub heldout_acc: f64,
    pub proxy_acc: f64,
}

/// Held-out accuracy of one (variant, sparsity) cell across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub variant: String,
    pub sparsity: f64,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single seed.
    pub std: f64,
    pub per_seed: Vec<SeedResult>,
}

impl CellStats {
    pub fn from_seeds(
        variant: impl Into<String>,
        sparsity: f64,
        per_seed: Vec<SeedResult>,
    ) -> Result<Self, AnalysisError> {
        let n = per_seed.len();
        if n == 0 {
            return Err(AnalysisError::TooFew { needed: 1, got: 0 });
        }
        let mean = per_seed.iter().map(|s| s.heldout_acc).sum::<f64>() / n as f64;
        let std = if n < 2 {
            0.0
        } else {
            let ss: f64 = per_seed.iter().map(|s| (s.heldout_acc - mean).powi(2)).sum();
            (ss / (n - 1) as f64).sqrt()
        };
        Ok(CellStats {
            variant: variant.into(),
            sparsity,
            mean,
            std,
            per_seed,
        })
    }

    /// A single-seed cell with the given mean, for fixtures.
    pub fn fixture(variant: impl Into<String>, sparsity: f64, mean: f64) -> Self {
        CellStats::from_seeds(
            variant,
            sparsity,
            vec![SeedResult {
                seed: Seed(0),
                heldout_acc: mean,
                proxy_acc: mean,
            }],
        )
        .expect("one seed")
    }
}

/// `(mean of the cell means, max - min)` over rank-monotone variants.
pub fn plateau_stats(cells: &[CellStats]) -> Result<(f64, f64), AnalysisError> {
    if cells.len() < 2 {
        return Err(AnalysisError::TooFew {
            needed: 2,
            got: cells.len(),
        });
    }
    let means = cells.iter().map(|c| c.mean);
    let estimate = means.clone().sum::<f64>() / cells.len() as f64;
    let max = means.clone().fold(f64::NEG_INFINITY, f64::max);
    let min = means.fold(f64::INFINITY, f64::min);
    Ok((estimate, max - min))
}

/// Best class mean minus the plateau; `None` for an empty class.
pub fn escape_delta(class_cells: &[CellStats], plateau: f64) -> Option<f64> {
    class_cells
        .iter()
        .map(|c| c.mean)
        .reduce(f64::max)
        .map(|best| best - plateau)
}

pub fn wiggle_premium(delta_k2: f64, delta_k1: f64) -> f64 {
    delta_k2 - delta_k1
}

/// Minimum feature-complexity class needed at a sparsity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    /// The plateau scorer is as good as anything else.
    Kappa0,
    /// Smooth non-monotone features escape the plateau.
    Kappa1,
    /// Wiggle-rich features beat smooth ones.
    Kappa2,
}

impl Verdict {
    pub fn level(self) -> u8 {
        self as u8
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "kappa{}", self.level())
    }
}

fn d_t_env() -> f64 {
    0.01
}
fn d_t_raw() -> f64 {
    0.005
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    #[serde(default = "d_t_env")]
    pub t_env: f64,
    #[serde(default = "d_t_raw")]
    pub t_raw: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            t_env: d_t_env(),
            t_raw: d_t_raw(),
        }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<(), AnalysisError> {
        if self.t_env > 0.0 && self.t_raw > 0.0 {
            Ok(())
        } else {
            Err(AnalysisError::Invalid(format!(
                "thresholds must be positive, got t_env={} t_raw={}",
                self.t_env, self.t_raw
            )))
        }
    }
}

/// Drops binary representation noise so that, e.g., `0.693 - 0.688`
/// compares equal to `0.005`.
pub fn round_delta(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

/// The probe decision tree: kappa0 if `delta_env < t_env`, else kappa1 if
/// `delta_raw < t_raw`, else kappa2. `delta_env` is the envelope class's gain
/// over the plateau scorer and `delta_raw` the raw class's gain over the
/// envelope class.
pub fn regime_verdict(delta_env: f64, delta_raw: f64, thresholds: &Thresholds) -> Verdict {
    if round_delta(delta_env) < thresholds.t_env {
        Verdict::Kappa0
    } else if round_delta(delta_raw) < thresholds.t_raw {
        Verdict::Kappa1
    } else {
        Verdict::Kappa2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndependenceReport {
    /// Spearman correlation with magnitude rank.
    pub rho: f64,
    /// Share of the feature's variance not explained by its best monotone
    /// fit in rank.
    pub residual_energy_fraction: f64,
    /// Set when the feature or the rank is constant.
    pub degenerate: bool,
}

impl IndependenceReport {
    /// The sufficient condition `|rho| < 0.3`.
    pub fn is_independent(&self) -> bool {
        !self.degenerate && self.rho.abs() < 0.3
    }
}

pub fn magnitude_independence_report(feature: &[f64], rank: &[f64]) -> Result<IndependenceReport, AnalysisError> {
    let s = spearman(feature, rank)?;
    let residual = isotonic_residual(feature, rank)?;
    let mean = feature.iter().sum::<f64>() / feature.len() as f64;
    let total: f64 = feature.iter().map(|v| (v - mean).powi(2)).sum();
    let resid: f64 = residual.iter().map(|r| r * r).sum();
    let degenerate = s.degenerate || total <= 0.0;
    Ok(IndependenceReport {
        rho: s.rho,
        residual_energy_fraction: if total > 0.0 { resid / total } else { 0.0 },
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{build_feature, FeatureSpec, OrbitStat};
    use crate::ranknorm::RankMap;
    use proptest::prelude::*;

    fn cells(means: &[f64]) -> Vec<CellStats> {
        means
            .iter()
            .enumerate()
            .map(|(i, &m)| CellStats::fixture(format!("v{i}"), 0.5, m))
            .collect()
    }

    #[test]
    fn table1_spreads() {
        let (p, s) = plateau_stats(&cells(&[0.9274, 0.9247, 0.9296])).unwrap();
        assert!((s - 0.0049).abs() < 1e-12);
        assert!((p - 0.927).abs() < 5e-4);
        let (p, s) = plateau_stats(&cells(&[0.8654, 0.8667, 0.8651])).unwrap();
        assert!((s - 0.0016).abs() < 1e-12);
        assert!((p - 0.866).abs() < 5e-4);
        assert_eq!(plateau_stats(&cells(&[0.5, 0.5])).unwrap().1, 0.0);
        assert_eq!(
            plateau_stats(&cells(&[0.5])),
            Err(AnalysisError::TooFew { needed: 2, got: 1 })
        );
    }

    #[test]
    fn escape_and_premium() {
        let k2 = escape_delta(&cells(&[0.403, 0.342]), 0.377).unwrap();
        let k1 = escape_delta(&cells(&[0.327, 0.356]), 0.377).unwrap();
        assert!((k2 - 0.026).abs() < 1e-12);
        assert!((k1 + 0.021).abs() < 1e-12);
        assert!((wiggle_premium(k2, k1) - 0.047).abs() < 1e-12);
        assert!((wiggle_premium(-0.008, 0.003) + 0.011).abs() < 1e-12);
        assert_eq!(escape_delta(&cells(&[0.4]), 0.4), Some(0.0));
        assert_eq!(escape_delta(&[], 0.4), None);
    }

    #[test]
    fn verdict_examples() {
        let t = Thresholds::default();
        assert_eq!(regime_verdict(0.868 - 0.865, 0.851 - 0.868, &t), Verdict::Kappa0);
        // exactly on the raw threshold: strict '<' says kappa2
        assert_eq!(regime_verdict(0.688 - 0.622, 0.693 - 0.688, &t), Verdict::Kappa2);
        assert_eq!(regime_verdict(0.356 - 0.377, 0.403 - 0.356, &t), Verdict::Kappa0);
        assert_eq!(regime_verdict(0.02, 0.001, &t), Verdict::Kappa1);
        assert_eq!(regime_verdict(0.0, 0.0, &t), Verdict::Kappa0);
    }

    #[test]
    fn sample_std() {
        let c = CellStats::from_seeds(
            "v",
            0.5,
            [0.1, 0.2, 0.3]
                .iter()
                .enumerate()
                .map(|(i, &a)| SeedResult {
                    seed: Seed(i as u64),
                    heldout_acc: a,
                    proxy_acc: a,
                })
                .collect(),
        )
        .unwrap();
        assert!((c.mean - 0.2).abs() < 1e-15);
        assert!((c.std - 0.1).abs() < 1e-12);
    }

    #[test]
    fn independence_reports() {
        let rank: Vec<f64> = (0..200).map(|i| i as f64).collect();
        let mono: Vec<f64> = rank.iter().map(|r| r.sqrt()).collect();
        let rep = magnitude_independence_report(&mono, &rank).unwrap();
        assert!((rep.rho - 1.0).abs() < 1e-12);
        assert!(rep.residual_energy_fraction < 1e-20);
        assert!(!rep.is_independent());

        let flat = vec![1.0; 200];
        assert!(magnitude_independence_report(&flat, &rank).unwrap().degenerate);

        let rm = RankMap::uniform(1536);
        let r = rm.flat();
        let mut worst: f64 = 0.0;
        for f in [5.0, 20.0, 50.0] {
            let col = build_feature(&rm, &FeatureSpec::Sinusoid { frequency: f }, Seed(0)).unwrap();
            let rep = magnitude_independence_report(&col, &r).unwrap();
            assert!(rep.rho.abs() < 0.1, "sin{f}: {}", rep.rho);
            assert!(rep.residual_energy_fraction > 0.5);
            worst = worst.max(rep.rho.abs());
        }
        // sin(10 pi t) correlates with t at about -0.156 in the continuum
        let col = build_feature(&rm, &FeatureSpec::Sinusoid { frequency: 10.0 }, Seed(0)).unwrap();
        assert!(magnitude_independence_report(&col, &r).unwrap().rho.abs() < 0.16);

        let var = build_feature(&rm, &FeatureSpec::orbit(OrbitStat::Var, true), Seed(0)).unwrap();
        let rep = magnitude_independence_report(&var, &r).unwrap();
        assert!((0.6..=0.9).contains(&rep.rho), "{}", rep.rho);
    }

    proptest! {
        #[test]
        fn spread_nonnegative_and_zero_iff_equal(means in prop::collection::vec(0.0f64..1.0, 2..10)) {
            let (_, s) = plateau_stats(&cells(&means)).unwrap();
            prop_assert!(s >= 0.0);
            let all_equal = means.iter().all(|&m| m == means[0]);
            prop_assert_eq!(s == 0.0, all_equal);
        }

        #[test]
        fn premium_antisymmetric(a in -1.0f64..1.0, b in -1.0f64..1.0) {
            prop_assert_eq!(wiggle_premium(a, b), -wiggle_premium(b, a));
        }

        #[test]
        fn verdict_is_pure(e in -0.1f64..0.1, r in -0.1f64..0.1) {
            let t = Thresholds::default();
            prop_assert_eq!(regime_verdict(e, r, &t), regime_verdict(e, r, &t));
        }
    }
}
