//! Fusion-exponent search: DBO over `W`, scoring each candidate by the
//! oracle's proxy accuracy of its Top-K selection.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dbo::{optimize_batched, OptimizerConfig, SearchError};
use crate::features::{build_matrix, FeatureError, FeatureMatrix, FeatureSpec};
use crate::fusion::{select_topk, FusionError, FusionWeights, PreparedFusion, DEFAULT_EPSILON_TAYLOR};
use crate::oracle::{EvalRequest, Oracle, OracleError, Split};
use crate::profile::{ModelProfile, Seed, Selection, Sparsity};
use crate::ranknorm::{allocate_budgets, rank_mm, BudgetError, BudgetVector};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Budget(#[from] BudgetError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl From<SearchError<PipelineError>> for PipelineError {
    fn from(e: SearchError<PipelineError>) -> Self {
        match e {
            SearchError::Config(m) => PipelineError::Config(m),
            SearchError::Fitness(e) => e,
        }
    }
}

/// Builds the feature matrix of `specs` for `profile`.
pub fn features_for(profile: &ModelProfile, specs: &[FeatureSpec], seed: Seed) -> Result<FeatureMatrix, FeatureError> {
    build_matrix(&rank_mm(profile), specs, seed)
}

/// A profile, its features and a sparsity, ready to turn exponent vectors
/// into selections.
#[derive(Debug, Clone)]
pub struct Scorer {
    fusion: PreparedFusion,
    budgets: BudgetVector,
    bounds: (f64, f64),
}

impl Scorer {
    pub fn new(
        profile: &ModelProfile,
        features: &FeatureMatrix,
        sparsity: Sparsity,
        bounds: (f64, f64),
    ) -> Result<Self, PipelineError> {
        Ok(Scorer {
            fusion: PreparedFusion::new(profile, features, DEFAULT_EPSILON_TAYLOR)?,
            budgets: allocate_budgets(profile, sparsity)?,
            bounds,
        })
    }

    /// Search-space dimension: the Taylor exponent plus one per feature.
    pub fn dim(&self) -> usize {
        self.fusion.dim() + 1
    }

    pub fn budgets(&self) -> &BudgetVector {
        &self.budgets
    }

    pub fn weights(&self, point: &[f64]) -> Result<FusionWeights, FusionError> {
        FusionWeights::from_point(point, self.bounds)
    }

    pub fn select(&self, weights: &FusionWeights) -> Result<Selection, FusionError> {
        select_topk(&self.fusion.fuse(weights)?, &self.budgets)
    }

    pub fn select_point(&self, point: &[f64]) -> Result<Selection, FusionError> {
        self.select(&self.weights(point)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub weights: FusionWeights,
    pub selection: Selection,
    /// Best proxy accuracy seen during the search.
    pub proxy_acc: f64,
    /// Oracle calls made by the search.
    pub evaluations: usize,
    /// Best proxy accuracy after each iteration.
    pub history: Vec<f64>,
}

/// Searches fusion exponents that maximize proxy accuracy. Request tags are
/// `{tag_prefix}{n}` with `n` counting every evaluation.
pub fn search_weights<O: Oracle + ?Sized>(
    oracle: &mut O,
    scorer: &Scorer,
    dbo: &OptimizerConfig,
    tag_prefix: &str,
) -> Result<SearchOutcome, PipelineError> {
    let mut counter = 0usize;
    let result = optimize_batched(
        |points: &[Vec<f64>]| -> Result<Vec<f64>, PipelineError> {
            let selections = points
                .par_iter()
                .map(|p| scorer.select_point(p))
                .collect::<Result<Vec<_>, _>>()?;
            let requests: Vec<EvalRequest> = selections
                .into_iter()
                .map(|sel| {
                    counter += 1;
                    EvalRequest::new(sel, Split::Proxy, format!("{tag_prefix}{}", counter - 1))
                })
                .collect();
            let results = oracle.evaluate_batch(&requests)?;
            Ok(results.iter().map(|r| -r.accuracy).collect())
        },
        scorer.dim(),
        dbo,
    )?;
    let weights = scorer.weights(&result.best_point)?;
    let selection = scorer.select(&weights)?;
    Ok(SearchOutcome {
        weights,
        selection,
        proxy_acc: -result.best_fitness,
        evaluations: result.evaluations,
        history: result.history.iter().map(|f| -f).collect(),
    })
}
