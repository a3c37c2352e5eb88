//! Domain types shared by every stage: model profiles, sparsity, selections
//! and seeds.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProfileError {
    #[error("profile has no layers")]
    NoLayers,
    #[error("layer `{layer}` has {channels} channel(s); at least 2 are required")]
    EmptyLayer { layer: String, channels: usize },
    #[error("layer `{layer}`: magnitude has {magnitude} entries but taylor has {taylor}")]
    LengthMismatch {
        layer: String,
        magnitude: usize,
        taylor: usize,
    },
    #[error("layer `{layer}`: {field}[{index}] is negative ({value})")]
    NegativeValue {
        layer: String,
        field: &'static str,
        index: usize,
        value: f64,
    },
    #[error("layer `{layer}`: {field}[{index}] is not finite")]
    NonFinite {
        layer: String,
        field: &'static str,
        index: usize,
    },
    #[error("duplicate layer id `{0}`")]
    DuplicateLayer(String),
    #[error("sparsity {0} is outside the open interval (0, 1)")]
    InvalidSparsity(f64),
    #[error("selection does not match profile: {0}")]
    InvalidSelection(String),
}

/// Wire/document form of a layer, before validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerDocument {
    pub layer_id: String,
    pub magnitude: Vec<f64>,
    pub taylor: Vec<f64>,
}

/// Decoded profile document: `{"layers": [{"layer_id", "magnitude", "taylor"}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileDocument {
    pub layers: Vec<LayerDocument>,
}

/// Per-channel scalars of one prunable layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerProfile {
    layer_id: String,
    magnitude: Vec<f64>,
    taylor: Vec<f64>,
}

impl LayerProfile {
    pub fn layer_id(&self) -> &str {
        &self.layer_id
    }

    /// L2 channel magnitudes.
    pub fn magnitude(&self) -> &[f64] {
        &self.magnitude
    }

    /// First-order Taylor importance `|grad . w|` per channel.
    pub fn taylor(&self) -> &[f64] {
        &self.taylor
    }

    pub fn channels(&self) -> usize {
        self.magnitude.len()
    }
}

/// A validated pruning substrate: at least one layer, each with two or more
/// channels of finite, non-negative magnitude and Taylor scores.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelProfile {
    layers: Vec<LayerProfile>,
}

impl ModelProfile {
    pub fn layers(&self) -> &[LayerProfile] {
        &self.layers
    }

    pub fn total_channels(&self) -> usize {
        self.layers.iter().map(LayerProfile::channels).sum()
    }

    pub fn layer(&self, layer_id: &str) -> Option<&LayerProfile> {
        self.layers.iter().find(|l| l.layer_id == layer_id)
    }

    /// Start offset of each layer in a flat, layer-ordered channel vector.
    pub fn offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        self.layers
            .iter()
            .map(|l| {
                let start = acc;
                acc += l.channels();
                start
            })
            .collect()
    }

    pub fn to_document(&self) -> ProfileDocument {
        ProfileDocument {
            layers: self
                .layers
                .iter()
                .map(|l| LayerDocument {
                    layer_id: l.layer_id.clone(),
                    magnitude: l.magnitude.clone(),
                    taylor: l.taylor.clone(),
                })
                .collect(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ProfileLoadError> {
        let doc: ProfileDocument = serde_json::from_str(text)?;
        Ok(validate_profile(doc)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_document()).expect("profile document serializes")
    }
}

#[derive(Debug, Error)]
pub enum ProfileLoadError {
    #[error("malformed profile document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Invalid(#[from] ProfileError),
}

fn check_values(layer: &str, field: &'static str, values: &[f64]) -> Result<(), ProfileError> {
    for (index, &value) in values.iter().enumerate() {
        if !value.is_finite() {
            return Err(ProfileError::NonFinite {
                layer: layer.to_string(),
                field,
                index,
            });
        }
        if value < 0.0 {
            return Err(ProfileError::NegativeValue {
                layer: layer.to_string(),
                field,
                index,
                value,
            });
        }
    }
    Ok(())
}

/// Enforces every profile invariant, returning the first violation found.
pub fn validate_profile(raw: ProfileDocument) -> Result<ModelProfile, ProfileError> {
    if raw.layers.is_empty() {
        return Err(ProfileError::NoLayers);
    }
    let mut layers = Vec::with_capacity(raw.layers.len());
    for doc in raw.layers {
        if layers.iter().any(|l: &LayerProfile| l.layer_id == doc.layer_id) {
            return Err(ProfileError::DuplicateLayer(doc.layer_id));
        }
        if doc.magnitude.len() != doc.taylor.len() {
            return Err(ProfileError::LengthMismatch {
                layer: doc.layer_id,
                magnitude: doc.magnitude.len(),
                taylor: doc.taylor.len(),
            });
        }
        if doc.magnitude.len() < 2 {
            return Err(ProfileError::EmptyLayer {
                layer: doc.layer_id,
                channels: doc.magnitude.len(),
            });
        }
        check_values(&doc.layer_id, "magnitude", &doc.magnitude)?;
        check_values(&doc.layer_id, "taylor", &doc.taylor)?;
        layers.push(LayerProfile {
            layer_id: doc.layer_id,
            magnitude: doc.magnitude,
            taylor: doc.taylor,
        });
    }
    Ok(ModelProfile { layers })
}

/// Fraction of channels removed, strictly inside (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Sparsity(f64);

impl Sparsity {
    pub fn new(value: f64) -> Result<Self, ProfileError> {
        if value > 0.0 && value < 1.0 {
            Ok(Sparsity(value))
        } else {
            Err(ProfileError::InvalidSparsity(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn keep_fraction(self) -> f64 {
        1.0 - self.0
    }
}

impl TryFrom<f64> for Sparsity {
    type Error = ProfileError;
    fn try_from(v: f64) -> Result<Self, Self::Error> {
        Sparsity::new(v)
    }
}

impl From<Sparsity> for f64 {
    fn from(s: Sparsity) -> f64 {
        s.0
    }
}

impl std::fmt::Display for Sparsity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Seed(pub u64);

impl Seed {
    /// Derives an independent child seed, e.g. one per (cell, purpose).
    pub fn derive(self, stream: u64) -> Seed {
        // splitmix64 finalizer over the combined value
        let mut z = self
            .0
            .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
            .wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        Seed(z ^ (z >> 31))
    }
}

impl std::fmt::Display for Seed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Kept channel indices per layer, in profile layer order.
///
/// Serializes as `{"kept": {layer_id: [indices]}}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    kept: IndexMap<String, Vec<usize>>,
}

impl Selection {
    /// Builds a selection, sorting each index list. Bounds and uniqueness are
    /// checked against `profile`.
    pub fn new(profile: &ModelProfile, kept: IndexMap<String, Vec<usize>>) -> Result<Self, ProfileError> {
        let sel = Selection::from_unchecked(kept);
        sel.check_against(profile)?;
        Ok(sel)
    }

    pub(crate) fn from_unchecked(mut kept: IndexMap<String, Vec<usize>>) -> Self {
        for v in kept.values_mut() {
            v.sort_unstable();
        }
        Selection { kept }
    }

    /// Selection that keeps every channel.
    pub fn keep_all(profile: &ModelProfile) -> Self {
        Selection {
            kept: profile
                .layers()
                .iter()
                .map(|l| (l.layer_id().to_string(), (0..l.channels()).collect()))
                .collect(),
        }
    }

    pub fn check_against(&self, profile: &ModelProfile) -> Result<(), ProfileError> {
        if self.kept.len() != profile.layers().len() {
            return Err(ProfileError::InvalidSelection(format!(
                "selection covers {} layers, profile has {}",
                self.kept.len(),
                profile.layers().len()
            )));
        }
        for layer in profile.layers() {
            let idx = self
                .kept
                .get(layer.layer_id())
                .ok_or_else(|| ProfileError::InvalidSelection(format!("missing layer `{}`", layer.layer_id())))?;
            if idx.windows(2).any(|w| w[0] == w[1]) {
                return Err(ProfileError::InvalidSelection(format!(
                    "duplicate index in layer `{}`",
                    layer.layer_id()
                )));
            }
            if let Some(&last) = idx.last() {
                if last >= layer.channels() {
                    return Err(ProfileError::InvalidSelection(format!(
                        "index {last} out of bounds for layer `{}` ({} channels)",
                        layer.layer_id(),
                        layer.channels()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn kept(&self) -> &IndexMap<String, Vec<usize>> {
        &self.kept
    }

    pub fn layer(&self, layer_id: &str) -> Option<&[usize]> {
        self.kept.get(layer_id).map(Vec::as_slice)
    }

    pub fn total_kept(&self) -> usize {
        self.kept.values().map(Vec::len).sum()
    }

    /// 0/1 keep mask per layer, for adapters that apply masks directly.
    pub fn masks(&self, profile: &ModelProfile) -> IndexMap<String, Vec<u8>> {
        profile
            .layers()
            .iter()
            .map(|l| {
                let mut mask = vec![0u8; l.channels()];
                if let Some(idx) = self.kept.get(l.layer_id()) {
                    for &i in idx {
                        mask[i] = 1;
                    }
                }
                (l.layer_id().to_string(), mask)
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("selection serializes")
    }

    pub fn masks_json(&self, profile: &ModelProfile) -> String {
        serde_json::json!({ "mask": self.masks(profile) }).to_string()
    }
}

#[cfg(test)]
pub(crate) fn uniform_profile(layers: usize, channels: usize) -> ModelProfile {
    validate_profile(ProfileDocument {
        layers: (0..layers)
            .map(|l| LayerDocument {
                layer_id: format!("layer{l}"),
                magnitude: (0..channels).map(|c| c as f64 + 1.0).collect(),
                taylor: (0..channels).map(|c| (c as f64 + 1.0) * 0.5).collect(),
            })
            .collect(),
    })
    .unwrap()
}
