//! Rank statistics: Spearman correlation and isotonic (PAVA) detrending.

use serde::{Deserialize, Serialize};

use super::FeatureError;
use crate::ranknorm::{ascending_order, grid_value};

/// Spearman correlation. `degenerate` is set (and `rho` is 0) when either
/// input is constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spearman {
    pub rho: f64,
    pub degenerate: bool,
}

/// 1-based ranks, ties receiving their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let order = ascending_order(values);
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        None
    } else {
        Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
    }
}

pub fn spearman(x: &[f64], y: &[f64]) -> Result<Spearman, FeatureError> {
    if x.len() != y.len() {
        return Err(FeatureError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(FeatureError::TooShort(x.len()));
    }
    Ok(match pearson(&average_ranks(x), &average_ranks(y)) {
        Some(rho) => Spearman { rho, degenerate: false },
        None => Spearman {
            rho: 0.0,
            degenerate: true,
        },
    })
}

/// Least-squares non-decreasing fit of `y` (already in the desired order),
/// by pool-adjacent-violators.
pub fn isotonic_fit(y: &[f64]) -> Vec<f64> {
    // blocks of (sum, count)
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(y.len());
    for &v in y {
        blocks.push((v, 1));
        while blocks.len() >= 2 {
            let (s2, c2) = blocks[blocks.len() - 1];
            let (s1, c1) = blocks[blocks.len() - 2];
            if s1 / c1 as f64 > s2 / c2 as f64 {
                blocks.pop();
                *blocks.last_mut().unwrap() = (s1 + s2, c1 + c2);
            } else {
                break;
            }
        }
    }
    blocks
        .into_iter()
        .flat_map(|(s, c)| std::iter::repeat_n(s / c as f64, c))
        .collect()
}

/// `feature` minus its best monotone non-decreasing fit over `rank` order.
pub fn isotonic_residual(feature: &[f64], rank: &[f64]) -> Result<Vec<f64>, FeatureError> {
    if feature.len() != rank.len() {
        return Err(FeatureError::LengthMismatch(feature.len(), rank.len()));
    }
    let order = ascending_order(rank);
    let ordered: Vec<f64> = order.iter().map(|&i| feature[i]).collect();
    let fit = isotonic_fit(&ordered);
    let mut residual = vec![0.0; feature.len()];
    for (pos, &idx) in order.iter().enumerate() {
        residual[idx] = feature[idx] - fit[pos];
    }
    Ok(residual)
}

/// Grid positions of each value's rank; equal values share the grid value
/// of their lowest rank.
pub fn rank_normalize(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let order = ascending_order(values);
    let mut out = vec![0.0; n];
    let mut first = 0;
    for (pos, &idx) in order.iter().enumerate() {
        if pos == 0 || values[idx] != values[order[pos - 1]] {
            first = pos;
        }
        out[idx] = grid_value(first + 1, n);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn spearman_identities() {
        assert!((spearman(&[1., 2., 3.], &[10., 20., 30.]).unwrap().rho - 1.0).abs() < 1e-12);
        assert!((spearman(&[1., 2., 3.], &[3., 2., 1.]).unwrap().rho - -1.0).abs() < 1e-12);
    }

    #[test]
    fn spearman_with_ties() {
        // ranks of y: 1.5 1.5 3.5 3.5 ; cov = 4, var_x = 5, var_y = 4 -> 4/sqrt(20)
        let r = spearman(&[1., 2., 3., 4.], &[1., 1., 2., 2.]).unwrap();
        assert!((r.rho - 4.0 / 20f64.sqrt()).abs() < 1e-12);
        assert!((r.rho - 0.894427191).abs() < 1e-9);
    }

    #[test]
    fn spearman_degenerate() {
        let r = spearman(&[1., 2., 3.], &[5., 5., 5.]).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.rho, 0.0);
        assert!(spearman(&[1.], &[1.]).is_err());
        assert!(spearman(&[1., 2.], &[1.]).is_err());
    }

    #[test]
    fn increasing_feature_has_zero_residual() {
        let rank: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let f: Vec<f64> = rank.iter().map(|r| r.exp()).collect();
        assert!(isotonic_residual(&f, &rank).unwrap().iter().all(|x| x.abs() <= 1e-12));
    }

    #[test]
    fn bump_residual() {
        // constant 1 with a bump of +2 at position 4: the fit is 1 up to
        // position 3, then one pooled block of mean 8/6 from position 4 on
        let rank: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        let mut f = vec![1.0; 10];
        f[4] = 3.0;
        let res = isotonic_residual(&f, &rank).unwrap();
        let block = 8.0 / 6.0;
        let expect: Vec<f64> = (0..10).map(|i| if i < 4 { 0.0 } else { f[i] - block }).collect();
        for (a, b) in res.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn reversed_feature_collapses_to_mean() {
        let rank: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        let f: Vec<f64> = (1..=10).rev().map(|i| i as f64).collect();
        let res = isotonic_residual(&f, &rank).unwrap();
        for (r, v) in res.iter().zip(&f) {
            assert!((r - (v - 5.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn rank_normalize_ties_share_lowest() {
        assert_eq!(rank_normalize(&[0.0, 5.0, 0.0]), vec![0.1, 1.0, 0.1]);
        assert_eq!(rank_normalize(&[3.0, 1.0, 2.0]), vec![1.0, 0.1, 0.55]);
    }

    proptest! {
        #[test]
        fn isotonic_fit_is_monotone_and_mean_preserving(y in prop::collection::vec(-10.0f64..10.0, 1..60)) {
            let fit = isotonic_fit(&y);
            for w in fit.windows(2) {
                prop_assert!(w[0] <= w[1] + 1e-12);
            }
            let s1: f64 = y.iter().sum();
            let s2: f64 = fit.iter().sum();
            prop_assert!((s1 - s2).abs() < 1e-9);
        }

        #[test]
        fn spearman_bounded(x in prop::collection::vec(-5.0f64..5.0, 2..50), seed in 0u64..1000) {
            let y: Vec<f64> = x.iter().enumerate().map(|(i, v)| v * 3.0 + (i as f64 * seed as f64).sin()).collect();
            let r = spearman(&x, &y).unwrap();
            prop_assert!((-1.0..=1.0).contains(&r.rho));
        }
    }
}
