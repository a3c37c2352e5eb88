use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{EvalRequest, EvalResult, Oracle, OracleError};
use crate::profile::{validate_profile, LayerDocument, ModelProfile, ProfileDocument, Seed, Selection};
use crate::ranknorm::rank_mm;

/// Deterministic synthetic evaluator.
///
/// ```text
/// accuracy = clamp(a0 - sum_dropped(u) / U - lambda * pairs / P, 0, 1)
/// ```
///
/// `pairs` counts dropped channel pairs of one layer whose indices differ by
/// at most `radius`; `P` is the number of such pairs when everything is
/// dropped. Both splits use the same formula.
#[derive(Debug, Clone)]
pub struct SurrogateModel {
    profile: ModelProfile,
    utilities: Vec<f64>,
    lambda: f64,
    radius: usize,
    a0: f64,
    noise_seed: Seed,
    utility_total: f64,
    pair_total: f64,
}

impl SurrogateModel {
    /// `utilities` is flat, in profile layer order.
    pub fn new(
        profile: ModelProfile,
        utilities: Vec<f64>,
        lambda: f64,
        radius: usize,
        a0: f64,
    ) -> Result<Self, OracleError> {
        let bad = |m: String| Err(OracleError::InvalidSurrogate(m));
        if utilities.len() != profile.total_channels() {
            return bad(format!(
                "{} utilities for {} channels",
                utilities.len(),
                profile.total_channels()
            ));
        }
        if let Some(i) = utilities.iter().position(|u| !(u.is_finite() && *u >= 0.0)) {
            return bad(format!("utility {i} is {}", utilities[i]));
        }
        if !(lambda.is_finite() && lambda >= 0.0) {
            return bad(format!("lambda {lambda} must be >= 0"));
        }
        if !(0.0..=1.0).contains(&a0) {
            return bad(format!("base accuracy {a0} outside [0, 1]"));
        }
        let utility_total = utilities.iter().sum();
        let pair_total = profile
            .layers()
            .iter()
            .map(|l| (1..=radius).map(|d| l.channels().saturating_sub(d)).sum::<usize>())
            .sum::<usize>() as f64;
        Ok(SurrogateModel {
            profile,
            utilities,
            lambda,
            radius,
            a0,
            noise_seed: Seed(0),
            utility_total,
            pair_total,
        })
    }

    pub fn utilities(&self) -> &[f64] {
        &self.utilities
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn base_accuracy(&self) -> f64 {
        self.a0
    }

    pub fn noise_seed(&self) -> Seed {
        self.noise_seed
    }

    /// Accuracy of `selection`; the heart of [`Oracle::evaluate`].
    pub fn accuracy(&self, selection: &Selection) -> Result<f64, OracleError> {
        selection
            .check_against(&self.profile)
            .map_err(OracleError::Misaligned)?;
        let mut lost = 0.0;
        let mut pairs = 0usize;
        let mut offset = 0;
        let mut dropped = Vec::new();
        for layer in self.profile.layers() {
            let n = layer.channels();
            dropped.clear();
            dropped.resize(n, true);
            for &i in selection.layer(layer.layer_id()).unwrap_or(&[]) {
                dropped[i] = false;
            }
            for (c, &d) in dropped.iter().enumerate() {
                if d {
                    lost += self.utilities[offset + c];
                    pairs += (1..=self.radius)
                        .take_while(|k| c + k < n)
                        .filter(|k| dropped[c + k])
                        .count();
                }
            }
            offset += n;
        }
        let mut acc = self.a0;
        if self.utility_total > 0.0 {
            acc -= lost / self.utility_total;
        }
        if self.pair_total > 0.0 {
            acc -= self.lambda * pairs as f64 / self.pair_total;
        }
        Ok(acc.clamp(0.0, 1.0))
    }
}

impl Oracle for SurrogateModel {
    fn profile(&self) -> &ModelProfile {
        &self.profile
    }

    fn evaluate(&mut self, request: &EvalRequest) -> Result<EvalResult, OracleError> {
        Ok(EvalResult {
            accuracy: self.accuracy(&request.selection)?,
            split: request.split,
            tag: request.tag.clone(),
        })
    }

    fn evaluate_batch(&mut self, requests: &[EvalRequest]) -> Result<Vec<EvalResult>, OracleError> {
        let this = &*self;
        requests
            .par_iter()
            .map(|r| {
                Ok(EvalResult {
                    accuracy: this.accuracy(&r.selection)?,
                    split: r.split,
                    tag: r.tag.clone(),
                })
            })
            .collect()
    }
}

fn d_layers() -> usize {
    4
}
fn d_channels() -> usize {
    256
}
fn d_lambda() -> f64 {
    0.1
}
fn d_radius() -> usize {
    1
}
fn d_a0() -> f64 {
    0.95
}
fn d_exponent() -> f64 {
    3.0
}
fn d_utility_noise() -> f64 {
    0.05
}
fn d_taylor_noise() -> f64 {
    0.3
}
fn d_index_jitter() -> f64 {
    0.1
}
fn d_bump_center() -> f64 {
    0.73
}
fn d_bump_width() -> f64 {
    0.04
}
fn d_bump_gain() -> f64 {
    3.0
}

/// Recipe for a synthetic profile and its surrogate.
///
/// Utilities are `r^exponent * (1 + utility_noise * z)` plus a Gaussian bump
/// of height `bump_gain * lambda` centred on rank-MM `bump_center` (by
/// default the keep boundary at S = 0.7), where `r` is the channel's rank-MM
/// value. With `lambda = 0` utility is therefore monotone in rank up to the
/// noise, and there is no boundary interaction either.
///
/// Magnitudes follow channel index plus Gaussian jitter, so index adjacency
/// roughly matches rank adjacency. Taylor scores are the utility times
/// log-normal noise of scale `taylor_noise`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateConfig {
    #[serde(default = "d_layers")]
    pub layers: usize,
    #[serde(default = "d_channels")]
    pub channels: usize,
    #[serde(default = "d_lambda")]
    pub lambda: f64,
    #[serde(default = "d_radius")]
    pub radius: usize,
    #[serde(default = "d_a0")]
    pub a0: f64,
    #[serde(default = "d_exponent")]
    pub exponent: f64,
    #[serde(default = "d_utility_noise")]
    pub utility_noise: f64,
    #[serde(default = "d_taylor_noise")]
    pub taylor_noise: f64,
    #[serde(default = "d_index_jitter")]
    pub index_jitter: f64,
    #[serde(default = "d_bump_center")]
    pub bump_center: f64,
    #[serde(default = "d_bump_width")]
    pub bump_width: f64,
    #[serde(default = "d_bump_gain")]
    pub bump_gain: f64,
    #[serde(default)]
    pub seed: Seed,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl SurrogateConfig {
    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    /// A synthetic profile of `layers x channels` and its surrogate.
    pub fn build(&self) -> Result<SurrogateModel, OracleError> {
        if self.layers == 0 || self.channels < 2 {
            return Err(OracleError::InvalidSurrogate(format!(
                "need >= 1 layer of >= 2 channels, got {} x {}",
                self.layers, self.channels
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed.derive(0x5eed).0);
        let n = self.channels;
        let layers = (0..self.layers)
            .map(|l| LayerDocument {
                layer_id: format!("block{l}"),
                magnitude: (0..n)
                    .map(|c| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        (1.0 + c as f64 / n as f64 + self.index_jitter * z).max(0.0)
                    })
                    .collect(),
                taylor: vec![0.0; n],
            })
            .collect();
        let skeleton = validate_profile(ProfileDocument { layers }).map_err(OracleError::InvalidProfile)?;
        self.attach(skeleton, &mut rng)
    }

    /// Surrogate for an existing profile: utilities come from its magnitude
    /// ranks; its Taylor scores are kept.
    pub fn for_profile(&self, profile: ModelProfile) -> Result<SurrogateModel, OracleError> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed.derive(0x5eed).0);
        let utilities = self.utilities(&profile, &mut rng);
        self.finish(profile, utilities)
    }

    fn utilities(&self, profile: &ModelProfile, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let ranks = rank_mm(profile).flat();
        let height = self.bump_gain * self.lambda;
        ranks
            .iter()
            .map(|&r| {
                let z: f64 = StandardNormal.sample(rng);
                let base = r.powf(self.exponent) * (1.0 + self.utility_noise * z).max(0.0);
                let d = (r - self.bump_center) / self.bump_width;
                base + height * (-0.5 * d * d).exp()
            })
            .collect()
    }

    fn attach(&self, skeleton: ModelProfile, rng: &mut ChaCha8Rng) -> Result<SurrogateModel, OracleError> {
        let utilities = self.utilities(&skeleton, rng);
        let mut doc = skeleton.to_document();
        let mut offset = 0;
        for layer in &mut doc.layers {
            for (c, t) in layer.taylor.iter_mut().enumerate() {
                let z: f64 = StandardNormal.sample(rng);
                *t = utilities[offset + c] * (self.taylor_noise * z).exp();
            }
            offset += layer.taylor.len();
        }
        let profile = validate_profile(doc).map_err(OracleError::InvalidProfile)?;
        self.finish(profile, utilities)
    }

    fn finish(&self, profile: ModelProfile, utilities: Vec<f64>) -> Result<SurrogateModel, OracleError> {
        let mut model = SurrogateModel::new(profile, utilities, self.lambda, self.radius, self.a0)?;
        model.noise_seed = self.seed;
        Ok(model)
    }
}
