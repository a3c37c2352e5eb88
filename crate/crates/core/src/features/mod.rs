//! Rank-space feature columns.
//!
//! Every column is a function of each channel's rank-MM value (plus a seed
//! for the randomized families), and is finally rank-normalized per layer so
//! it lies on the `[0.1, 1.0]` grid. That keeps every column strictly
//! positive, which negative fusion exponents require.

mod orbit;
mod savgol;
mod spline;
mod stats;

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use orbit::{logistic_orbit, orbit_statistic, rank_to_mu, OrbitStat, DEFAULT_STEPS, DEFAULT_X0, MU_HI, MU_LO};
pub use savgol::savgol_smooth;
pub use spline::MonotoneSpline;
pub use stats::{average_ranks, isotonic_fit, isotonic_residual, rank_normalize, spearman, Spearman};

use crate::profile::Seed;
use crate::ranknorm::RankMap;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeatureError {
    #[error("{what} {value} out of range")]
    OutOfRange { what: &'static str, value: f64 },
    #[error("logistic map start {0} is not inside (0, 1)")]
    InvalidInit(f64),
    #[error("series of length {0} is too short")]
    TooShort(usize),
    #[error("window {window} must be odd and larger than polyorder {polyorder}")]
    BadWindow { window: usize, polyorder: usize },
    #[error("window {window} exceeds series length {len}")]
    WindowTooLarge { window: usize, len: usize },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("unknown feature kind `{0}`")]
    UnknownKind(String),
    #[error("invalid feature spec: {0}")]
    InvalidSpec(String),
    #[error("feature column `{name}` has non-positive value at channel {index}")]
    NonPositive { name: String, index: usize },
}

fn default_steps() -> usize {
    DEFAULT_STEPS
}
fn default_x0() -> f64 {
    DEFAULT_X0
}
fn default_window() -> usize {
    99
}
fn default_polyorder() -> usize {
    3
}
fn default_weier_a() -> f64 {
    0.5
}
fn default_weier_b() -> f64 {
    7.0
}
fn default_terms() -> usize {
    8
}
fn default_knots() -> usize {
    20
}

/// Deterministic non-monotone transforms of rank-MM `r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MagTransform {
    /// `sin(3 pi r)`
    Sin3,
    /// `|sin(5 pi r)|`
    AbsSin5,
    /// Triangle wave of period 0.4.
    Triangle,
    /// `4 r (1 - r)`
    Parabola,
}

impl MagTransform {
    pub const ALL: [MagTransform; 4] = [
        MagTransform::Sin3,
        MagTransform::AbsSin5,
        MagTransform::Triangle,
        MagTransform::Parabola,
    ];

    pub fn eval(self, r: f64) -> f64 {
        match self {
            MagTransform::Sin3 => (3.0 * PI * r).sin(),
            MagTransform::AbsSin5 => (5.0 * PI * r).sin().abs(),
            MagTransform::Triangle => {
                let phase = (r / 0.4).fract();
                1.0 - 2.0 * (phase - 0.5).abs()
            }
            MagTransform::Parabola => 4.0 * r * (1.0 - r),
        }
    }

    fn name(self) -> &'static str {
        match self {
            MagTransform::Sin3 => "sin3",
            MagTransform::AbsSin5 => "abssin5",
            MagTransform::Triangle => "triangle",
            MagTransform::Parabola => "parabola",
        }
    }
}

/// Handcrafted rank-space bumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum BumpShape {
    Gaussian { center: f64, sigma: f64 },
    Hat { center: f64, half_width: f64 },
    RaisedCosine { center: f64, half_width: f64 },
    DualGaussian { centers: [f64; 2], sigma: f64 },
}

impl BumpShape {
    pub fn eval(&self, r: f64) -> f64 {
        let gauss = |c: f64, s: f64| (-(r - c) * (r - c) / (2.0 * s * s)).exp();
        match *self {
            BumpShape::Gaussian { center, sigma } => gauss(center, sigma),
            BumpShape::Hat { center, half_width } => (1.0 - (r - center).abs() / half_width).max(0.0),
            BumpShape::RaisedCosine { center, half_width } => {
                if (r - center).abs() < half_width {
                    0.5 * (1.0 + (PI * (r - center) / half_width).cos())
                } else {
                    0.0
                }
            }
            BumpShape::DualGaussian { centers, sigma } => gauss(centers[0], sigma) + gauss(centers[1], sigma),
        }
    }

    fn validate(&self) -> Result<(), FeatureError> {
        let centre_ok = |c: f64| (0.1..=1.0).contains(&c);
        let ok = match *self {
            BumpShape::Gaussian { center, sigma } => centre_ok(center) && sigma > 0.0,
            BumpShape::Hat { center, half_width } | BumpShape::RaisedCosine { center, half_width } => {
                centre_ok(center) && half_width > 0.0
            }
            BumpShape::DualGaussian { centers, sigma } => centers.iter().all(|&c| centre_ok(c)) && sigma > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(FeatureError::InvalidSpec(format!(
                "bump {self:?}: centres must lie in [0.1, 1.0] and widths be positive"
            )))
        }
    }

    fn name(&self) -> String {
        let pct = |c: f64| (c * 100.0).round() as i64;
        match *self {
            BumpShape::Gaussian { center, .. } => format!("gauss{}", pct(center)),
            BumpShape::Hat { center, .. } => format!("hat{}", pct(center)),
            BumpShape::RaisedCosine { center, .. } => format!("cos{}", pct(center)),
            BumpShape::DualGaussian { centers, .. } => {
                format!("gauss{}_{}", pct(centers[0]), pct(centers[1]))
            }
        }
    }
}

/// One feature column. Serialized with a `kind` tag, e.g.
/// `{"kind": "logistic_orbit_stat", "stat": "var", "smooth": true}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureSpec {
    LogisticOrbitStat {
        stat: OrbitStat,
        #[serde(default)]
        smooth: bool,
        #[serde(default = "default_steps")]
        steps: usize,
        #[serde(default = "default_x0")]
        x0: f64,
        #[serde(default = "default_window")]
        window: usize,
        #[serde(default = "default_polyorder")]
        polyorder: usize,
    },
    /// `sin(frequency * pi * t)` with `t = (mu - 3.57) / 0.43`.
    Sinusoid {
        frequency: f64,
    },
    Weierstrass {
        #[serde(default)]
        stream: u64,
        #[serde(default = "default_weier_a")]
        a: f64,
        #[serde(default = "default_weier_b")]
        b: f64,
        #[serde(default = "default_terms")]
        terms: usize,
    },
    PureMagTransform {
        transform: MagTransform,
    },
    RandomMonotoneSpline {
        #[serde(default)]
        stream: u64,
        #[serde(default = "default_knots")]
        knots: usize,
    },
    Bump {
        #[serde(flatten)]
        shape: BumpShape,
    },
}

const KINDS: [&str; 6] = [
    "logistic_orbit_stat",
    "sinusoid",
    "weierstrass",
    "pure_mag_transform",
    "random_monotone_spline",
    "bump",
];

impl FeatureSpec {
    pub fn orbit(stat: OrbitStat, smooth: bool) -> Self {
        FeatureSpec::LogisticOrbitStat {
            stat,
            smooth,
            steps: DEFAULT_STEPS,
            x0: DEFAULT_X0,
            window: default_window(),
            polyorder: default_polyorder(),
        }
    }

    pub fn weierstrass(stream: u64) -> Self {
        FeatureSpec::Weierstrass {
            stream,
            a: default_weier_a(),
            b: default_weier_b(),
            terms: default_terms(),
        }
    }

    pub fn spline(stream: u64) -> Self {
        FeatureSpec::RandomMonotoneSpline {
            stream,
            knots: default_knots(),
        }
    }

    pub fn bump(shape: BumpShape) -> Self {
        FeatureSpec::Bump { shape }
    }

    /// Parses a JSON spec, reporting unrecognized kinds as
    /// [`FeatureError::UnknownKind`].
    pub fn from_value(value: &serde_json::Value) -> Result<Self, FeatureError> {
        let kind = value
            .get("kind")
            .and_then(|k| k.as_str())
            .ok_or_else(|| FeatureError::InvalidSpec("missing string field `kind`".into()))?;
        if !KINDS.contains(&kind) {
            return Err(FeatureError::UnknownKind(kind.to_string()));
        }
        let spec: FeatureSpec =
            serde_json::from_value(value.clone()).map_err(|e| FeatureError::InvalidSpec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), FeatureError> {
        let bad = |m: &str| Err(FeatureError::InvalidSpec(m.to_string()));
        match self {
            FeatureSpec::LogisticOrbitStat {
                steps,
                x0,
                window,
                polyorder,
                ..
            } => {
                if *steps < 2 {
                    return bad("orbit needs at least 2 steps");
                }
                if !(*x0 > 0.0 && *x0 < 1.0) {
                    return Err(FeatureError::InvalidInit(*x0));
                }
                if window % 2 == 0 || window <= polyorder {
                    return Err(FeatureError::BadWindow {
                        window: *window,
                        polyorder: *polyorder,
                    });
                }
                Ok(())
            }
            FeatureSpec::Sinusoid { frequency } => {
                if frequency.is_finite() && *frequency != 0.0 {
                    Ok(())
                } else {
                    bad("sinusoid frequency must be finite and non-zero")
                }
            }
            FeatureSpec::Weierstrass { a, b, terms, .. } => {
                if *a > 0.0 && *a < 1.0 && *b > 1.0 && *terms >= 1 {
                    Ok(())
                } else {
                    bad("weierstrass needs 0 < a < 1, b > 1, terms >= 1")
                }
            }
            FeatureSpec::PureMagTransform { .. } => Ok(()),
            FeatureSpec::RandomMonotoneSpline { knots, .. } => {
                if *knots >= 2 {
                    Ok(())
                } else {
                    bad("spline needs at least 2 knots")
                }
            }
            FeatureSpec::Bump { shape } => shape.validate(),
        }
    }

    /// Short column name used in reports and CSV headers.
    pub fn name(&self) -> String {
        match self {
            FeatureSpec::LogisticOrbitStat { stat, smooth, .. } => {
                if *smooth {
                    format!("{}_smooth", stat.name())
                } else {
                    stat.name().to_string()
                }
            }
            FeatureSpec::Sinusoid { frequency } => format!("sin{frequency}"),
            FeatureSpec::Weierstrass { stream, .. } => format!("weier{stream}"),
            FeatureSpec::PureMagTransform { transform } => format!("puremag_{}", transform.name()),
            FeatureSpec::RandomMonotoneSpline { stream, .. } => format!("spline{stream}"),
            FeatureSpec::Bump { shape } => format!("bump_{}", shape.name()),
        }
    }

    fn uses_seed(&self) -> bool {
        matches!(
            self,
            FeatureSpec::Weierstrass { .. } | FeatureSpec::RandomMonotoneSpline { .. }
        )
    }
}

fn rng_for(seed: Seed, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.0);
    rng.set_stream(stream);
    rng
}

/// `t = (mu - 3.57) / (4.0 - 3.57)`, which is `(r - 0.1) / 0.9`.
fn unit_position(r: f64) -> f64 {
    (r - 0.1) / 0.9
}

/// Raw (pre-normalization) value of a per-channel function of rank.
fn pointwise(spec: &FeatureSpec, seed: Seed) -> Result<Box<dyn Fn(f64) -> f64>, FeatureError> {
    Ok(match spec {
        FeatureSpec::Sinusoid { frequency } => {
            let f = *frequency;
            Box::new(move |r| (f * PI * unit_position(r)).sin())
        }
        FeatureSpec::Weierstrass { stream, a, b, terms } => {
            let mut rng = rng_for(seed, *stream);
            let phases: Vec<f64> = (0..*terms).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
            let (a, b) = (*a, *b);
            Box::new(move |r| {
                let t = unit_position(r);
                phases
                    .iter()
                    .enumerate()
                    .map(|(i, phase)| {
                        let k = (i + 1) as i32;
                        a.powi(k - 1) * (b.powi(k) * PI * t + phase).cos()
                    })
                    .sum()
            })
        }
        FeatureSpec::PureMagTransform { transform } => {
            let t = *transform;
            Box::new(move |r| t.eval(r))
        }
        FeatureSpec::RandomMonotoneSpline { stream, knots } => {
            let mut rng = rng_for(seed, *stream);
            let n = *knots;
            let xs: Vec<f64> = (0..n).map(|j| 0.1 + 0.9 * j as f64 / (n - 1) as f64).collect();
            let mut ys = Vec::with_capacity(n);
            let mut acc = 0.0;
            for _ in 0..n {
                acc += rng.gen_range(0.05..1.0);
                ys.push(acc);
            }
            let spline = MonotoneSpline::new(xs, ys);
            Box::new(move |r| spline.eval(r))
        }
        FeatureSpec::Bump { shape } => {
            let shape = shape.clone();
            Box::new(move |r| shape.eval(r))
        }
        FeatureSpec::LogisticOrbitStat { .. } => unreachable!("orbit features are built per layer"),
    })
}

/// Pre-normalization column for one layer.
fn raw_layer(spec: &FeatureSpec, ranks: &[f64], seed: Seed) -> Result<Vec<f64>, FeatureError> {
    match spec {
        FeatureSpec::LogisticOrbitStat {
            stat,
            smooth,
            steps,
            x0,
            window,
            polyorder,
        } => {
            let values = ranks
                .iter()
                .map(|&r| {
                    let orbit = logistic_orbit(rank_to_mu(r)?, *steps, *x0)?;
                    orbit_statistic(&orbit, *stat)
                })
                .collect::<Result<Vec<f64>, _>>()?;
            if !smooth {
                return Ok(values);
            }
            // mu order is rank order
            let order = crate::ranknorm::ascending_order(ranks);
            let series: Vec<f64> = order.iter().map(|&i| values[i]).collect();
            let smoothed = savgol_smooth(&series, *window, *polyorder)?;
            let mut out = vec![0.0; ranks.len()];
            for (pos, &idx) in order.iter().enumerate() {
                out[idx] = smoothed[pos];
            }
            Ok(out)
        }
        other => {
            let f = pointwise(other, seed)?;
            Ok(ranks.iter().map(|&r| f(r)).collect())
        }
    }
}

/// Raw feature values before per-layer rank normalization, in layer order.
pub fn build_raw_feature(rank_map: &RankMap, spec: &FeatureSpec, seed: Seed) -> Result<Vec<f64>, FeatureError> {
    spec.validate()?;
    let mut out = Vec::with_capacity(rank_map.total_channels());
    for (_, ranks) in rank_map.layers() {
        out.extend(raw_layer(spec, ranks, seed)?);
    }
    Ok(out)
}

/// Feature column on the per-layer rank grid, in layer order. `seed` only
/// affects the Weierstrass and random-spline kinds.
pub fn build_feature(rank_map: &RankMap, spec: &FeatureSpec, seed: Seed) -> Result<Vec<f64>, FeatureError> {
    spec.validate()?;
    let seed = if spec.uses_seed() { seed } else { Seed(0) };
    let mut out = Vec::with_capacity(rank_map.total_channels());
    for (_, ranks) in rank_map.layers() {
        out.extend(rank_normalize(&raw_layer(spec, ranks, seed)?));
    }
    Ok(out)
}

/// Channels x D matrix of strictly positive feature values, stored by
/// column, rows in profile layer order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    names: Vec<String>,
    channels: usize,
    columns: Vec<Vec<f64>>,
}

impl FeatureMatrix {
    /// Checks alignment and strict positivity of every column.
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self, FeatureError> {
        if names.len() != columns.len() {
            return Err(FeatureError::LengthMismatch(names.len(), columns.len()));
        }
        if columns.is_empty() {
            return Err(FeatureError::InvalidSpec(
                "feature matrix needs at least one column".into(),
            ));
        }
        let channels = columns[0].len();
        for (name, col) in names.iter().zip(&columns) {
            if col.len() != channels {
                return Err(FeatureError::LengthMismatch(channels, col.len()));
            }
            if let Some(index) = col.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
                return Err(FeatureError::NonPositive {
                    name: name.clone(),
                    index,
                });
            }
        }
        Ok(FeatureMatrix {
            names,
            channels,
            columns,
        })
    }

    /// Zero-column matrix: the fused score is the Taylor backbone alone.
    pub fn empty(channels: usize) -> Self {
        FeatureMatrix {
            names: Vec::new(),
            channels,
            columns: Vec::new(),
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn row(&self, channel: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[channel]).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.names.join(",");
        out.push('\n');
        for c in 0..self.channels {
            let row: Vec<String> = self.columns.iter().map(|col| col[c].to_string()).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// `{"names": [...], "rows": [[...], ...]}`
    pub fn to_json(&self) -> String {
        let rows: Vec<Vec<f64>> = (0..self.channels).map(|c| self.row(c)).collect();
        serde_json::json!({ "names": self.names, "rows": rows }).to_string()
    }
}

/// Builds one column per spec. Duplicate names get a numeric suffix.
pub fn build_matrix(rank_map: &RankMap, specs: &[FeatureSpec], seed: Seed) -> Result<FeatureMatrix, FeatureError> {
    if specs.is_empty() {
        return Ok(FeatureMatrix::empty(rank_map.total_channels()));
    }
    let mut names = Vec::with_capacity(specs.len());
    let mut columns = Vec::with_capacity(specs.len());
    for spec in specs {
        let mut name = spec.name();
        if names.contains(&name) {
            name = format!("{name}_{}", names.len());
        }
        names.push(name);
        columns.push(build_feature(rank_map, spec, seed)?);
    }
    FeatureMatrix::new(names, columns)
}
