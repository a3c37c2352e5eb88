//! Named scorer variants: a feature list plus its complexity class.

use serde::{Deserialize, Serialize};

use crate::analysis::{ClassMap, Thresholds};
use crate::features::{BumpShape, FeatureSpec, MagTransform, OrbitStat};

/// Role of a variant in the regime analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantClass {
    /// Reference scorer; not part of any class.
    Baseline,
    /// The plateau scorer deltas are measured against.
    Anchor,
    Kappa0,
    Kappa1,
    Kappa2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    pub name: String,
    #[serde(default)]
    pub features: Vec<FeatureSpec>,
    pub class: VariantClass,
}

impl Variant {
    pub fn new(name: &str, class: VariantClass, features: Vec<FeatureSpec>) -> Self {
        Variant {
            name: name.to_string(),
            features,
            class,
        }
    }
}

fn orbit(stats: &[OrbitStat], smooth: bool) -> Vec<FeatureSpec> {
    stats.iter().map(|&s| FeatureSpec::orbit(s, smooth)).collect()
}

const FOUR: [OrbitStat; 4] = [OrbitStat::Peak, OrbitStat::Var, OrbitStat::Entropy, OrbitStat::Range];
const SIX: [OrbitStat; 6] = [
    OrbitStat::Peak,
    OrbitStat::Var,
    OrbitStat::Entropy,
    OrbitStat::Range,
    OrbitStat::Autocorr,
    OrbitStat::Mean,
];

/// Looks up a variant of the full battery by name.
pub fn preset(name: &str) -> Option<Variant> {
    use VariantClass::*;
    let v = match name {
        "Taylor" => Variant::new(name, Baseline, vec![]),
        "V1a" => Variant::new(name, Anchor, orbit(&[OrbitStat::Peak], true)),
        "V1d" => Variant::new(name, Kappa0, orbit(&[OrbitStat::Range], true)),
        "V1b" => Variant::new(name, Kappa1, orbit(&[OrbitStat::Var], true)),
        "V1c" => Variant::new(name, Kappa1, orbit(&[OrbitStat::Entropy], true)),
        "RandomSpline" => Variant::new(name, Kappa0, (0..4).map(FeatureSpec::spline).collect()),
        "V1" => Variant::new(name, Kappa1, orbit(&FOUR, true)),
        "A5" => Variant::new(name, Kappa2, orbit(&FOUR, false)),
        "A5_Log6" => Variant::new(name, Kappa2, orbit(&SIX, false)),
        "A5_Log6_smooth" => Variant::new(name, Kappa1, orbit(&SIX, true)),
        "NL_sin" => Variant::new(
            name,
            Kappa2,
            [5.0, 10.0, 20.0, 50.0]
                .iter()
                .map(|&frequency| FeatureSpec::Sinusoid { frequency })
                .collect(),
        ),
        "Weier4" => Variant::new(name, Kappa2, (0..4).map(FeatureSpec::weierstrass).collect()),
        "PureMag4" => Variant::new(
            name,
            Kappa2,
            MagTransform::ALL
                .iter()
                .map(|&transform| FeatureSpec::PureMagTransform { transform })
                .collect(),
        ),
        "Gauss70" => Variant::new(
            name,
            Kappa1,
            vec![FeatureSpec::bump(BumpShape::Gaussian {
                center: 0.7,
                sigma: 0.05,
            })],
        ),
        "Hat70" => Variant::new(
            name,
            Kappa1,
            vec![FeatureSpec::bump(BumpShape::Hat {
                center: 0.7,
                half_width: 0.1,
            })],
        ),
        "Cos70" => Variant::new(
            name,
            Kappa1,
            vec![FeatureSpec::bump(BumpShape::RaisedCosine {
                center: 0.7,
                half_width: 0.1,
            })],
        ),
        "GaussDual" => Variant::new(
            name,
            Kappa1,
            vec![FeatureSpec::bump(BumpShape::DualGaussian {
                centers: [0.3, 0.7],
                sigma: 0.05,
            })],
        ),
        _ => return None,
    };
    Some(v)
}

pub const BATTERY: [&str; 17] = [
    "Taylor",
    "V1a",
    "V1d",
    "V1b",
    "V1c",
    "RandomSpline",
    "V1",
    "A5",
    "A5_Log6",
    "A5_Log6_smooth",
    "NL_sin",
    "Weier4",
    "PureMag4",
    "Gauss70",
    "Hat70",
    "Cos70",
    "GaussDual",
];

/// Every preset variant.
pub fn battery() -> Vec<Variant> {
    BATTERY
        .iter()
        .map(|n| preset(n).expect("battery names are presets"))
        .collect()
}

/// The nine-class grid: three rank-monotone scorers, two smooth
/// non-monotone combos, raw orbit statistics and three non-monotone controls.
pub fn nine_class_grid() -> Vec<Variant> {
    [
        "V1a",
        "RandomSpline",
        "V1d",
        "V1b",
        "V1",
        "A5",
        "NL_sin",
        "Weier4",
        "PureMag4",
    ]
    .iter()
    .map(|n| preset(n).expect("grid names are presets"))
    .collect()
}

/// Class map implied by the variants' labels. Falls back to the default
/// anchor name when no variant is labelled as anchor.
pub fn class_map(variants: &[Variant], thresholds: Thresholds) -> ClassMap {
    let pick = |c: VariantClass| -> Vec<String> {
        variants
            .iter()
            .filter(|v| v.class == c)
            .map(|v| v.name.clone())
            .collect()
    };
    ClassMap {
        anchor: pick(VariantClass::Anchor)
            .into_iter()
            .next()
            .unwrap_or_else(|| ClassMap::default().anchor),
        kappa0: pick(VariantClass::Kappa0),
        kappa1: pick(VariantClass::Kappa1),
        kappa2: pick(VariantClass::Kappa2),
        thresholds,
        expected_zones: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn battery_is_complete_and_unique() {
        let b = battery();
        assert_eq!(b.len(), 17);
        let mut names: Vec<&str> = b.iter().map(|v| v.name.as_str()).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), 17);
        assert!(preset("nope").is_none());
        assert_eq!(preset("A5_Log6").unwrap().features.len(), 6);
        assert!(preset("Taylor").unwrap().features.is_empty());
    }

    #[test]
    fn labels_match_default_class_map() {
        let derived = class_map(&battery(), Thresholds::default());
        let default = ClassMap::default();
        assert_eq!(derived.anchor, default.anchor);
        let sorted = |mut v: Vec<String>| {
            v.sort();
            v
        };
        assert_eq!(sorted(derived.kappa0), sorted(default.kappa0));
        assert_eq!(sorted(derived.kappa1), sorted(default.kappa1));
        assert_eq!(sorted(derived.kappa2), sorted(default.kappa2));
    }

    #[test]
    fn variant_json_round_trip() {
        for v in battery() {
            let text = serde_json::to_string(&v).unwrap();
            assert_eq!(serde_json::from_str::<Variant>(&text).unwrap(), v);
        }
    }
}
