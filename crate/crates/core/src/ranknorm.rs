//! Per-layer rank min-max normalization and proportional budget allocation.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::profile::{ModelProfile, Sparsity};

pub const GRID_LO: f64 = 0.1;
pub const GRID_HI: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BudgetError {
    #[error("sparsity {sparsity} keeps {target} of {total} channels; selection is degenerate")]
    BudgetInfeasible { sparsity: f64, target: usize, total: usize },
}

/// Grid position of 1-based rank `rank` among `n` values: `0.1 + 0.9 (rank-1)/(n-1)`.
///
/// The endpoints are returned exactly.
pub fn grid_value(rank: usize, n: usize) -> f64 {
    debug_assert!(n >= 2 && rank >= 1 && rank <= n);
    if rank == 1 {
        GRID_LO
    } else if rank == n {
        GRID_HI
    } else {
        // (n-1 + 9(rank-1)) / (10(n-1)): one rounding of an exact ratio
        ((n - 1) + 9 * (rank - 1)) as f64 / (10 * (n - 1)) as f64
    }
}

/// Channel order by ascending value; equal values by ascending index.
pub(crate) fn ascending_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    order
}

/// Maps each value to the grid position of its rank. Ties are broken by
/// ascending index, so the output is always a permutation of the grid.
pub fn rank_to_grid(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut out = vec![0.0; n];
    for (pos, idx) in ascending_order(values).into_iter().enumerate() {
        out[idx] = grid_value(pos + 1, n);
    }
    out
}

/// rank-MM value of every channel, per layer, in profile order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankMap {
    values: IndexMap<String, Vec<f64>>,
}

impl RankMap {
    pub fn layers(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.values.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn layer(&self, layer_id: &str) -> Option<&[f64]> {
        self.values.get(layer_id).map(Vec::as_slice)
    }

    pub fn total_channels(&self) -> usize {
        self.values.values().map(Vec::len).sum()
    }

    /// Every value, concatenated in layer order.
    pub fn flat(&self) -> Vec<f64> {
        self.values.values().flatten().copied().collect()
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        self.values.values().map(Vec::len).collect()
    }

    /// Builds a rank map directly from per-layer rank values, e.g. a uniform
    /// grid for feature diagnostics.
    pub fn from_layers(values: IndexMap<String, Vec<f64>>) -> Self {
        RankMap { values }
    }

    /// One layer of `n` channels whose ranks follow channel index.
    pub fn uniform(n: usize) -> Self {
        let mut values = IndexMap::new();
        values.insert("layer0".to_string(), (1..=n).map(|r| grid_value(r, n)).collect());
        RankMap { values }
    }
}

/// Per-layer rank min-max normalization of channel magnitudes.
pub fn rank_mm(profile: &ModelProfile) -> RankMap {
    RankMap {
        values: profile
            .layers()
            .iter()
            .map(|l| (l.layer_id().to_string(), rank_to_grid(l.magnitude())))
            .collect(),
    }
}

/// Channels to keep, per layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetVector {
    budgets: IndexMap<String, usize>,
}

impl BudgetVector {
    pub fn get(&self, layer_id: &str) -> Option<usize> {
        self.budgets.get(layer_id).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, usize)> {
        self.budgets.iter().map(|(k, &v)| (k.as_str(), v))
    }

    pub fn total(&self) -> usize {
        self.budgets.values().sum()
    }

    pub fn from_map(budgets: IndexMap<String, usize>) -> Self {
        BudgetVector { budgets }
    }
}

/// Keep target `round((1-S)|C|)` split across layers by largest remainder.
///
/// Exact integer arithmetic: layer `l` gets `floor(T n_l / N)` and the
/// leftover channels go one each to the largest fractional parts, earlier
/// layers first on ties.
pub fn allocate_budgets(profile: &ModelProfile, s: Sparsity) -> Result<BudgetVector, BudgetError> {
    let total = profile.total_channels();
    let target = (s.keep_fraction() * total as f64).round() as usize;
    if target == 0 || target >= total {
        return Err(BudgetError::BudgetInfeasible {
            sparsity: s.value(),
            target,
            total,
        });
    }
    let sizes: Vec<usize> = profile.layers().iter().map(|l| l.channels()).collect();
    let mut budgets: Vec<usize> = sizes.iter().map(|&n| target * n / total).collect();
    let mut remainders: Vec<(usize, usize)> = sizes
        .iter()
        .enumerate()
        .map(|(i, &n)| (target * n % total, i))
        .collect();
    // largest remainder first, then layer order
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let leftover = target - budgets.iter().sum::<usize>();
    for &(_, i) in remainders.iter().take(leftover) {
        budgets[i] += 1;
    }
    Ok(BudgetVector {
        budgets: profile
            .layers()
            .iter()
            .zip(budgets)
            .map(|(l, k)| (l.layer_id().to_string(), k))
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{validate_profile, LayerDocument, ProfileDocument};
    use proptest::prelude::*;

    fn profile_from(layers: Vec<Vec<f64>>) -> ModelProfile {
        validate_profile(ProfileDocument {
            layers: layers
                .into_iter()
                .enumerate()
                .map(|(i, m)| LayerDocument {
                    layer_id: format!("l{i}"),
                    taylor: vec![1.0; m.len()],
                    magnitude: m,
                })
                .collect(),
        })
        .unwrap()
    }

    fn sizes(sizes: &[usize]) -> ModelProfile {
        profile_from(sizes.iter().map(|&n| (0..n).map(|c| c as f64).collect()).collect())
    }

    #[test]
    fn three_channel_layer() {
        let r = rank_mm(&profile_from(vec![vec![5.0, 1.0, 3.0]]));
        assert_eq!(r.layer("l0").unwrap(), &[1.0, 0.1, 0.55]);
    }

    #[test]
    fn ties_break_by_index() {
        let r = rank_mm(&profile_from(vec![vec![2.0, 2.0]]));
        assert_eq!(r.layer("l0").unwrap(), &[0.1, 1.0]);
    }

    #[test]
    fn equal_step_layer_has_exact_step() {
        let n = 1536;
        let r = rank_mm(&profile_from(vec![(0..n).map(|c| c as f64 * 0.25).collect()]));
        let v = r.layer("l0").unwrap();
        let step = 0.9 / 1535.0;
        for w in v.windows(2) {
            assert!(((w[1] - w[0]) - step).abs() <= 4.0 * f64::EPSILON);
        }
        assert_eq!(v[0], 0.1);
        assert_eq!(v[n - 1], 1.0);
    }

    #[test]
    fn budgets_exact_proportionality() {
        let b = allocate_budgets(&sizes(&[4, 4]), Sparsity::new(0.5).unwrap()).unwrap();
        assert_eq!(b.iter().map(|(_, k)| k).collect::<Vec<_>>(), vec![2, 2]);
    }

    /// Largest-remainder oracle: enumerate all budget vectors with the right
    /// total and pick the one minimizing the sorted deviation from the exact
    /// shares (lexicographic over layers on ties).
    fn brute_budgets(sizes: &[usize], target: usize) -> Vec<usize> {
        let total: usize = sizes.iter().sum();
        let shares: Vec<f64> = sizes.iter().map(|&n| target as f64 * n as f64 / total as f64).collect();
        let mut best: Option<(f64, Vec<usize>)> = None;
        let mut cur = vec![0usize; sizes.len()];
        fn rec(
            i: usize,
            left: usize,
            sizes: &[usize],
            shares: &[f64],
            cur: &mut Vec<usize>,
            best: &mut Option<(f64, Vec<usize>)>,
        ) {
            if i == sizes.len() {
                if left != 0 {
                    return;
                }
                // every layer within one of its floor share
                if cur
                    .iter()
                    .zip(shares)
                    .any(|(&k, &s)| (k as f64) < s.floor() || (k as f64) > s.floor() + 1.0)
                {
                    return;
                }
                let cost: f64 = cur.iter().zip(shares).map(|(&k, &s)| (k as f64 - s).powi(2)).sum();
                if best.as_ref().is_none_or(|(c, _)| cost < *c - 1e-12) {
                    *best = Some((cost, cur.clone()));
                }
                return;
            }
            for k in 0..=sizes[i].min(left) {
                cur[i] = k;
                rec(i + 1, left - k, sizes, shares, cur, best);
            }
        }
        rec(0, target, sizes, &shares, &mut cur, &mut best);
        best.unwrap().1
    }

    #[test]
    fn budgets_largest_remainder() {
        assert_eq!(brute_budgets(&[3, 5], 3), vec![1, 2]);
        let b = allocate_budgets(&sizes(&[3, 5]), Sparsity::new(0.6).unwrap()).unwrap();
        assert_eq!(b.iter().map(|(_, k)| k).collect::<Vec<_>>(), vec![1, 2]);
    }

    #[test]
    fn budgets_at_model_scale() {
        let p = sizes(&[1536; 12]);
        let b = allocate_budgets(&p, Sparsity::new(0.7).unwrap()).unwrap();
        assert_eq!(b.total(), 5530);
        let ks: Vec<usize> = b.iter().map(|(_, k)| k).collect();
        assert_eq!(&ks[..10], &[461; 10]);
        assert_eq!(&ks[10..], &[460; 2]);
    }

    #[test]
    fn budgets_degenerate() {
        let p = sizes(&[2, 2]);
        assert!(matches!(
            allocate_budgets(&p, Sparsity::new(0.99).unwrap()),
            Err(BudgetError::BudgetInfeasible { target: 0, .. })
        ));
        assert!(allocate_budgets(&p, Sparsity::new(0.01).unwrap()).is_err());
    }

    proptest! {
        #[test]
        fn grid_is_a_permutation(m in prop::collection::vec(0.0f64..100.0, 2..300)) {
            let n = m.len();
            let mut v = rank_to_grid(&m);
            v.sort_by(f64::total_cmp);
            for (i, x) in v.iter().enumerate() {
                prop_assert_eq!(*x, grid_value(i + 1, n));
            }
        }

        #[test]
        fn monotone_transform_invariance(m in prop::collection::vec(0.01f64..100.0, 2..300)) {
            let p1 = profile_from(vec![m.clone()]);
            let p2 = profile_from(vec![m.iter().map(|x| x.sqrt() * 4.0 + 1.0).collect()]);
            prop_assert_eq!(rank_mm(&p1), rank_mm(&p2));
        }

        #[test]
        fn budgets_conserve_total(
            sizes_v in prop::collection::vec(2usize..60, 1..8),
            s in 0.05f64..0.95,
        ) {
            let p = sizes(&sizes_v);
            let total = p.total_channels();
            let target = ((1.0 - s) * total as f64).round() as usize;
            match allocate_budgets(&p, Sparsity::new(s).unwrap()) {
                Ok(b) => {
                    prop_assert_eq!(b.total(), target);
                    for ((_, k), n) in b.iter().zip(&sizes_v) {
                        prop_assert!(k <= *n);
                    }
                    if sizes_v.len() <= 4 && target <= 40 {
                        let ks: Vec<usize> = b.iter().map(|(_, k)| k).collect();
                        let brute = brute_budgets(&sizes_v, target);
                        let cost = |v: &[usize]| -> f64 {
                            v.iter().zip(&sizes_v).map(|(&k, &n)| (k as f64 - target as f64 * n as f64 / total as f64).powi(2)).sum()
                        };
                        prop_assert!((cost(&ks) - cost(&brute)).abs() < 1e-9);
                    }
                }
                Err(_) => prop_assert!(target == 0 || target == total),
            }
        }
    }
}
