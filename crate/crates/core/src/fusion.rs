//! Multiplicative exponent fusion and per-layer Top-K selection.
//!
//! Fused scores `s(c) = max(taylor_c, eps)^w_t * prod_i C_i(c)^w_i` are held
//! as natural logs: exponents up to 40 on values as small as `1e-12` put `s`
//! far outside `f64` range, while the log stays finite and orders identically.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureMatrix;
use crate::profile::{ModelProfile, Selection};
use crate::ranknorm::BudgetVector;

pub const DEFAULT_EPSILON_TAYLOR: f64 = 1e-12;
pub const DEFAULT_BOUND: f64 = 40.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FusionError {
    #[error("feature matrix has {features} rows but profile has {profile} channels")]
    Misaligned { features: usize, profile: usize },
    #[error("weights have {weights} feature exponents but matrix has {features} columns")]
    DimensionMismatch { weights: usize, features: usize },
    #[error("feature `{name}` has non-positive value at channel {index}")]
    NonPositiveFeature { name: String, index: usize },
    #[error("exponent {value} outside bounds [{lo}, {hi}]")]
    OutOfBounds { value: f64, lo: f64, hi: f64 },
    #[error("budget {budget} exceeds layer `{layer}` with {channels} channels")]
    BudgetExceedsLayer {
        layer: String,
        budget: usize,
        channels: usize,
    },
    #[error("no budget for layer `{0}`")]
    MissingBudget(String),
    #[error("score for layer `{0}` is not finite")]
    NonFiniteScore(String),
}

/// Exponent vector `(w_t, w_1..w_D)` within `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionWeights {
    pub w_t: f64,
    pub w: Vec<f64>,
    pub bounds: (f64, f64),
}

impl FusionWeights {
    pub fn new(w_t: f64, w: Vec<f64>, bounds: (f64, f64)) -> Result<Self, FusionError> {
        let (lo, hi) = bounds;
        for &value in std::iter::once(&w_t).chain(&w) {
            if !(lo..=hi).contains(&value) {
                return Err(FusionError::OutOfBounds { value, lo, hi });
            }
        }
        Ok(FusionWeights { w_t, w, bounds })
    }

    /// `point[0]` is the Taylor exponent, the rest are feature exponents.
    pub fn from_point(point: &[f64], bounds: (f64, f64)) -> Result<Self, FusionError> {
        FusionWeights::new(point[0], point[1..].to_vec(), bounds)
    }

    /// Equal-weight fusion, `W = (1, ..., 1)`.
    pub fn ones(dim: usize) -> Self {
        FusionWeights {
            w_t: 1.0,
            w: vec![1.0; dim],
            bounds: (-DEFAULT_BOUND, DEFAULT_BOUND),
        }
    }

    pub fn to_point(&self) -> Vec<f64> {
        std::iter::once(self.w_t).chain(self.w.iter().copied()).collect()
    }
}

/// Fused scores per layer, stored as natural logarithms.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    log_scores: IndexMap<String, Vec<f64>>,
}

impl ScoreVector {
    pub fn from_log_scores(log_scores: IndexMap<String, Vec<f64>>) -> Result<Self, FusionError> {
        for (layer, v) in &log_scores {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(FusionError::NonFiniteScore(layer.clone()));
            }
        }
        Ok(ScoreVector { log_scores })
    }

    /// From positive linear-domain scores.
    pub fn from_scores(scores: IndexMap<String, Vec<f64>>) -> Result<Self, FusionError> {
        ScoreVector::from_log_scores(
            scores
                .into_iter()
                .map(|(k, v)| (k, v.into_iter().map(f64::ln).collect()))
                .collect(),
        )
    }

    pub fn log_scores(&self) -> &IndexMap<String, Vec<f64>> {
        &self.log_scores
    }

    /// Linear-domain scores of one layer; may overflow for extreme exponents.
    pub fn scores(&self, layer_id: &str) -> Option<Vec<f64>> {
        self.log_scores
            .get(layer_id)
            .map(|v| v.iter().map(|x| x.exp()).collect())
    }
}

pub fn fuse_scores(
    profile: &ModelProfile,
    features: &FeatureMatrix,
    weights: &FusionWeights,
    epsilon_taylor: f64,
) -> Result<ScoreVector, FusionError> {
    PreparedFusion::new(profile, features, epsilon_taylor)?.fuse(weights)
}

/// Logs of the Taylor backbone and feature columns, computed once so that
/// many weight vectors can be scored cheaply.
#[derive(Debug, Clone)]
pub struct PreparedFusion {
    layers: Vec<(String, usize)>,
    log_taylor: Vec<f64>,
    log_cols: Vec<Vec<f64>>,
}

impl PreparedFusion {
    pub fn new(profile: &ModelProfile, features: &FeatureMatrix, epsilon_taylor: f64) -> Result<Self, FusionError> {
        let total = profile.total_channels();
        if features.channels() != total {
            return Err(FusionError::Misaligned {
                features: features.channels(),
                profile: total,
            });
        }
        let log_cols = features
            .columns()
            .iter()
            .zip(features.names())
            .map(|(col, name)| {
                col.iter()
                    .enumerate()
                    .map(|(index, &v)| {
                        if v > 0.0 {
                            Ok(v.ln())
                        } else {
                            Err(FusionError::NonPositiveFeature {
                                name: name.clone(),
                                index,
                            })
                        }
                    })
                    .collect::<Result<Vec<f64>, _>>()
            })
            .collect::<Result<_, _>>()?;
        Ok(PreparedFusion {
            layers: profile
                .layers()
                .iter()
                .map(|l| (l.layer_id().to_string(), l.channels()))
                .collect(),
            log_taylor: profile
                .layers()
                .iter()
                .flat_map(|l| l.taylor().iter().map(|&t| t.max(epsilon_taylor).ln()))
                .collect(),
            log_cols,
        })
    }

    /// Number of feature exponents expected.
    pub fn dim(&self) -> usize {
        self.log_cols.len()
    }

    pub fn fuse(&self, weights: &FusionWeights) -> Result<ScoreVector, FusionError> {
        if self.log_cols.len() != weights.w.len() {
            return Err(FusionError::DimensionMismatch {
                weights: weights.w.len(),
                features: self.log_cols.len(),
            });
        }
        let (lo, hi) = weights.bounds;
        for &value in std::iter::once(&weights.w_t).chain(&weights.w) {
            if !(lo..=hi).contains(&value) {
                return Err(FusionError::OutOfBounds { value, lo, hi });
            }
        }
        let mut out = IndexMap::with_capacity(self.layers.len());
        let mut offset = 0;
        for (layer, n) in &self.layers {
            let mut scores: Vec<f64> = self.log_taylor[offset..offset + n]
                .iter()
                .map(|lt| weights.w_t * lt)
                .collect();
            for (w, col) in weights.w.iter().zip(&self.log_cols) {
                for (s, c) in scores.iter_mut().zip(&col[offset..offset + n]) {
                    *s += w * c;
                }
            }
            offset += n;
            out.insert(layer.clone(), scores);
        }
        ScoreVector::from_log_scores(out)
    }
}

/// Keeps the `K` highest scores of each layer; equal scores favour the lower
/// channel index.
pub fn select_topk(scores: &ScoreVector, budgets: &BudgetVector) -> Result<Selection, FusionError> {
    let mut kept = IndexMap::with_capacity(scores.log_scores.len());
    for (layer, s) in &scores.log_scores {
        let k = budgets
            .get(layer)
            .ok_or_else(|| FusionError::MissingBudget(layer.clone()))?;
        if k > s.len() {
            return Err(FusionError::BudgetExceedsLayer {
                layer: layer.clone(),
                budget: k,
                channels: s.len(),
            });
        }
        let mut order: Vec<usize> = (0..s.len()).collect();
        let cmp = |a: &usize, b: &usize| s[*b].total_cmp(&s[*a]).then(a.cmp(b));
        if k > 0 && k < s.len() {
            order.select_nth_unstable_by(k - 1, cmp);
        }
        let mut top: Vec<usize> = order[..k].to_vec();
        top.sort_unstable();
        kept.insert(layer.clone(), top);
    }
    Ok(Selection::from_unchecked(kept))
}
