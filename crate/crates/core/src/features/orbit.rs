//! Logistic-map orbits and their scalar summaries.

use serde::{Deserialize, Serialize};

use super::FeatureError;

pub const MU_LO: f64 = 3.57;
pub const MU_HI: f64 = 4.0;
pub const DEFAULT_STEPS: usize = 64;
pub const DEFAULT_X0: f64 = 0.1;
pub const ENTROPY_BINS: usize = 16;

/// Affine map from the rank grid [0.1, 1.0] onto the chaotic band [3.57, 4.0].
pub fn rank_to_mu(rank_value: f64) -> Result<f64, FeatureError> {
    if !(0.1..=1.0).contains(&rank_value) {
        return Err(FeatureError::OutOfRange {
            what: "rank",
            value: rank_value,
        });
    }
    Ok(MU_LO + (MU_HI - MU_LO) * (rank_value - 0.1) / 0.9)
}

/// Iterates `x <- mu x (1 - x)` `steps` times from `x0`; the result holds
/// `x_1 ..= x_steps`.
pub fn logistic_orbit(mu: f64, steps: usize, x0: f64) -> Result<Vec<f64>, FeatureError> {
    if !(x0 > 0.0 && x0 < 1.0) {
        return Err(FeatureError::InvalidInit(x0));
    }
    if steps == 0 {
        return Err(FeatureError::InvalidSpec("orbit needs at least one step".into()));
    }
    if !(mu > 0.0 && mu <= 4.0) {
        return Err(FeatureError::OutOfRange { what: "mu", value: mu });
    }
    let mut x = x0;
    Ok((0..steps)
        .map(|_| {
            x = mu * x * (1.0 - x);
            x
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrbitStat {
    Peak,
    Var,
    Entropy,
    Range,
    Autocorr,
    Mean,
}

impl OrbitStat {
    pub fn name(self) -> &'static str {
        match self {
            OrbitStat::Peak => "peak",
            OrbitStat::Var => "var",
            OrbitStat::Entropy => "entropy",
            OrbitStat::Range => "range",
            OrbitStat::Autocorr => "autocorr",
            OrbitStat::Mean => "mean",
        }
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn population_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
}

/// Shannon entropy (nats) of a 16-bin histogram over [0, 1].
fn histogram_entropy(xs: &[f64]) -> f64 {
    let mut counts = [0usize; ENTROPY_BINS];
    for &x in xs {
        let bin = ((x.clamp(0.0, 1.0) * ENTROPY_BINS as f64) as usize).min(ENTROPY_BINS - 1);
        counts[bin] += 1;
    }
    let n = xs.len() as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum::<f64>()
        .max(0.0)
}

/// Lag-1 Pearson correlation of `x_t` against `x_{t+1}`; 0 when either side
/// has no variance.
fn lag1_autocorr(xs: &[f64]) -> f64 {
    let (a, b) = (&xs[..xs.len() - 1], &xs[1..]);
    let (ma, mb) = (mean(a), mean(b));
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va <= 0.0 || vb <= 0.0 {
        0.0
    } else {
        (cov / (va.sqrt() * vb.sqrt())).clamp(-1.0, 1.0)
    }
}

pub fn orbit_statistic(orbit: &[f64], stat: OrbitStat) -> Result<f64, FeatureError> {
    if orbit.len() < 2 {
        return Err(FeatureError::TooShort(orbit.len()));
    }
    let max = orbit.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = orbit.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(match stat {
        OrbitStat::Peak => max,
        OrbitStat::Range => max - min,
        OrbitStat::Mean => mean(orbit),
        OrbitStat::Var => population_variance(orbit),
        OrbitStat::Entropy => histogram_entropy(orbit),
        OrbitStat::Autocorr => lag1_autocorr(orbit),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mu_endpoints() {
        assert_eq!(rank_to_mu(0.1).unwrap(), 3.57);
        assert_eq!(rank_to_mu(1.0).unwrap(), 4.0);
        assert!((rank_to_mu(0.55).unwrap() - 3.785).abs() < 1e-12);
        assert!(matches!(rank_to_mu(0.05), Err(FeatureError::OutOfRange { .. })));
    }

    #[test]
    fn fixed_point() {
        let o = logistic_orbit(2.0, 10, 0.5).unwrap();
        assert!(o.iter().all(|&x| x == 0.5));
    }

    #[test]
    fn chaotic_first_iterates() {
        let o = logistic_orbit(4.0, 3, 0.1).unwrap();
        // 4(0.1)(0.9), 4(0.36)(0.64), 4(0.9216)(0.0784)
        let expect = [0.36, 0.9216, 0.28901376];
        for (a, b) in o.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15, "{a} vs {b}");
        }
    }

    #[test]
    fn degenerate_orbit_at_half() {
        let o = logistic_orbit(4.0, 5, 0.5).unwrap();
        assert_eq!(o, vec![1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn invalid_init() {
        assert!(matches!(logistic_orbit(3.8, 8, 0.0), Err(FeatureError::InvalidInit(_))));
        assert!(matches!(logistic_orbit(3.8, 8, 1.0), Err(FeatureError::InvalidInit(_))));
    }

    #[test]
    fn constant_orbit_stats() {
        let o = vec![0.5; 8];
        assert_eq!(orbit_statistic(&o, OrbitStat::Var).unwrap(), 0.0);
        assert_eq!(orbit_statistic(&o, OrbitStat::Range).unwrap(), 0.0);
        assert_eq!(orbit_statistic(&o, OrbitStat::Entropy).unwrap(), 0.0);
        assert_eq!(orbit_statistic(&o, OrbitStat::Peak).unwrap(), 0.5);
        assert_eq!(orbit_statistic(&o, OrbitStat::Autocorr).unwrap(), 0.0);
    }

    #[test]
    fn alternating_orbit_stats() {
        let o = [0.2, 0.8, 0.2, 0.8];
        assert!((orbit_statistic(&o, OrbitStat::Range).unwrap() - 0.6).abs() < 1e-15);
        assert!((orbit_statistic(&o, OrbitStat::Mean).unwrap() - 0.5).abs() < 1e-15);
        assert!((orbit_statistic(&o, OrbitStat::Autocorr).unwrap() + 1.0).abs() < 1e-12);
        // two equally filled bins
        assert!((orbit_statistic(&o, OrbitStat::Entropy).unwrap() - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn chaotic_orbit_entropy() {
        let o = logistic_orbit(4.0, 64, 0.1).unwrap();
        // histogram counted independently of the implementation's binning
        let mut counts = std::collections::BTreeMap::new();
        for x in &o {
            let mut bin = 0;
            while bin < 15 && *x >= (bin + 1) as f64 / 16.0 {
                bin += 1;
            }
            *counts.entry(bin).or_insert(0usize) += 1;
        }
        let oracle: f64 = counts
            .values()
            .map(|&c| {
                let p = c as f64 / 64.0;
                -p * p.ln()
            })
            .sum();
        let h = orbit_statistic(&o, OrbitStat::Entropy).unwrap();
        assert!((h - oracle).abs() < 1e-12);
        assert!(h > 1.5);
        // numpy.histogram(bins=16, range=(0, 1)) on the same orbit
        assert!((h - 2.4557657879749013).abs() < 1e-12);
    }

    #[test]
    fn too_short() {
        assert!(matches!(
            orbit_statistic(&[0.3], OrbitStat::Mean),
            Err(FeatureError::TooShort(1))
        ));
    }
}
