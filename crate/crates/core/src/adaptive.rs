//! Probe-then-prune: classify the regime from three cheap searches, then
//! spend the full budget on the winning class.

use serde::{Deserialize, Serialize};

use crate::analysis::{Thresholds, Verdict};
use crate::dbo::OptimizerConfig;
use crate::features::FeatureSpec;
use crate::fusion::FusionWeights;
use crate::oracle::{EvalRequest, Oracle, Split};
use crate::profile::{Seed, Selection, Sparsity};
use crate::search::{features_for, search_weights, PipelineError, Scorer};
use crate::variants::preset;

fn preset_features(name: &str) -> Vec<FeatureSpec> {
    preset(name).map(|v| v.features).unwrap_or_default()
}

fn probe_budget() -> OptimizerConfig {
    OptimizerConfig {
        population: 10,
        iterations: 5,
        ..OptimizerConfig::default()
    }
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveConfig {
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default = "probe_budget")]
    pub probe_budget: OptimizerConfig,
    #[serde(default)]
    pub full_budget: OptimizerConfig,
    #[serde(default = "plateau_default")]
    pub plateau: Vec<FeatureSpec>,
    #[serde(default = "envelope_default")]
    pub envelope: Vec<FeatureSpec>,
    #[serde(default = "raw_default")]
    pub raw: Vec<FeatureSpec>,
    /// Evaluate the returned selection once on the held-out split.
    #[serde(default = "default_true")]
    pub heldout_final: bool,
}

fn plateau_default() -> Vec<FeatureSpec> {
    preset_features("V1a")
}
fn envelope_default() -> Vec<FeatureSpec> {
    preset_features("V1")
}
fn raw_default() -> Vec<FeatureSpec> {
    preset_features("A5")
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        AdaptiveConfig {
            thresholds: Thresholds::default(),
            probe_budget: probe_budget(),
            full_budget: OptimizerConfig::default(),
            plateau: plateau_default(),
            envelope: envelope_default(),
            raw: raw_default(),
            heldout_final: true,
        }
    }
}

impl AdaptiveConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        self.thresholds
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        self.probe_budget.validate().map_err(PipelineError::Config)?;
        self.full_budget.validate().map_err(PipelineError::Config)?;
        if self.probe_budget.evaluations() > self.full_budget.evaluations() {
            return Err(PipelineError::Config(format!(
                "probe budget ({} evaluations) exceeds full budget ({})",
                self.probe_budget.evaluations(),
                self.full_budget.evaluations()
            )));
        }
        for spec in self.plateau.iter().chain(&self.envelope).chain(&self.raw) {
            spec.validate()?;
        }
        Ok(())
    }

    fn specs(&self, verdict: Verdict) -> &[FeatureSpec] {
        match verdict {
            Verdict::Kappa0 => &self.plateau,
            Verdict::Kappa1 => &self.envelope,
            Verdict::Kappa2 => &self.raw,
        }
    }
}

/// The branch taken from three proxy accuracies.
pub fn classify(a_plateau: f64, a_env: f64, a_raw: f64, thresholds: &Thresholds) -> (f64, f64, Verdict) {
    let delta_env = a_env - a_plateau;
    let delta_raw = a_raw - a_env;
    (
        delta_env,
        delta_raw,
        crate::analysis::regime_verdict(delta_env, delta_raw, thresholds),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub plateau_acc: f64,
    pub envelope_acc: f64,
    pub raw_acc: f64,
    pub delta_env: f64,
    pub delta_raw: f64,
    pub branch: Verdict,
    pub probe_evaluations: usize,
    pub full_evaluations: usize,
    pub heldout_evaluations: usize,
    pub total_evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveOutcome {
    pub kappa_hat: Verdict,
    pub selection: Selection,
    pub weights: FusionWeights,
    pub proxy_acc: f64,
    pub heldout_acc: Option<f64>,
    pub report: ProbeReport,
}

/// Runs the three probes on the proxy split, picks the regime, re-searches
/// the chosen class at full budget and returns its selection.
pub fn adaptive_prune<O: Oracle + ?Sized>(
    oracle: &mut O,
    sparsity: Sparsity,
    config: &AdaptiveConfig,
    seed: Seed,
) -> Result<AdaptiveOutcome, PipelineError> {
    config.validate()?;
    let profile = oracle.profile().clone();
    let bounds = config.full_budget.bounds;
    let scorer_for = |specs: &[FeatureSpec]| -> Result<Scorer, PipelineError> {
        let features = features_for(&profile, specs, seed)?;
        Scorer::new(&profile, &features, sparsity, bounds)
    };

    let mut probe_acc = [0.0; 3];
    let mut probe_evaluations = 0;
    for (k, (verdict, name)) in [
        (Verdict::Kappa0, "plateau"),
        (Verdict::Kappa1, "envelope"),
        (Verdict::Kappa2, "raw"),
    ]
    .into_iter()
    .enumerate()
    {
        let scorer = scorer_for(config.specs(verdict))?;
        let dbo = config.probe_budget.clone().with_seed(seed.derive(k as u64));
        let out = search_weights(oracle, &scorer, &dbo, &format!("probe-{name}-"))?;
        probe_acc[k] = out.proxy_acc;
        probe_evaluations += out.evaluations;
    }
    let (delta_env, delta_raw, branch) = classify(probe_acc[0], probe_acc[1], probe_acc[2], &config.thresholds);

    let scorer = scorer_for(config.specs(branch))?;
    let dbo = config.full_budget.clone().with_seed(seed.derive(3));
    let full = search_weights(oracle, &scorer, &dbo, "full-")?;

    let heldout_acc = if config.heldout_final {
        let request = EvalRequest::new(full.selection.clone(), Split::Heldout, "final");
        Some(oracle.evaluate(&request)?.accuracy)
    } else {
        None
    };
    let heldout_evaluations = usize::from(heldout_acc.is_some());
    Ok(AdaptiveOutcome {
        kappa_hat: branch,
        selection: full.selection,
        weights: full.weights,
        proxy_acc: full.proxy_acc,
        heldout_acc,
        report: ProbeReport {
            plateau_acc: probe_acc[0],
            envelope_acc: probe_acc[1],
            raw_acc: probe_acc[2],
            delta_env,
            delta_raw,
            branch,
            probe_evaluations,
            full_evaluations: full.evaluations,
            heldout_evaluations,
            total_evaluations: probe_evaluations + full.evaluations + heldout_evaluations,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{EvalResult, OracleError, SurrogateConfig, SurrogateModel};
    use crate::profile::ModelProfile;

    #[test]
    fn branches_follow_probe_accuracies() {
        let t = Thresholds::default();
        let (de, _, v) = classify(0.865, 0.868, 0.851, &t);
        assert!((de - 0.003).abs() < 1e-12);
        assert_eq!(v, Verdict::Kappa0);
        let (de, dr, v) = classify(0.622, 0.688, 0.693, &t);
        assert!((de - 0.066).abs() < 1e-12 && (dr - 0.005).abs() < 1e-12);
        assert_eq!(v, Verdict::Kappa2);
        assert_eq!(classify(0.7, 0.7, 0.7, &t).2, Verdict::Kappa0);
        assert_eq!(classify(0.6, 0.7, 0.7, &t).2, Verdict::Kappa1);
    }

    #[test]
    fn config_validation() {
        assert!(AdaptiveConfig::default().validate().is_ok());
        let mut c = AdaptiveConfig::default();
        c.full_budget.population = 4;
        c.full_budget.iterations = 1;
        assert!(c.validate().is_err());
        let mut c = AdaptiveConfig::default();
        c.thresholds.t_env = 0.0;
        assert!(c.validate().is_err());
        let text = serde_json::to_string(&AdaptiveConfig::default()).unwrap();
        assert_eq!(
            serde_json::from_str::<AdaptiveConfig>(&text).unwrap(),
            AdaptiveConfig::default()
        );
        assert_eq!(
            serde_json::from_str::<AdaptiveConfig>("{}").unwrap(),
            AdaptiveConfig::default()
        );
    }

    struct Counting {
        inner: SurrogateModel,
        proxy: usize,
        heldout: usize,
    }

    impl Oracle for Counting {
        fn profile(&self) -> &ModelProfile {
            self.inner.profile()
        }
        fn evaluate(&mut self, request: &EvalRequest) -> Result<EvalResult, OracleError> {
            match request.split {
                Split::Proxy => self.proxy += 1,
                Split::Heldout => self.heldout += 1,
            }
            self.inner.evaluate(request)
        }
    }

    fn small_config() -> AdaptiveConfig {
        AdaptiveConfig {
            probe_budget: OptimizerConfig {
                population: 6,
                iterations: 2,
                ..OptimizerConfig::default()
            },
            full_budget: OptimizerConfig {
                population: 8,
                iterations: 3,
                ..OptimizerConfig::default()
            },
            ..AdaptiveConfig::default()
        }
    }

    #[test]
    fn evaluation_count_is_exact() {
        let inner = SurrogateConfig {
            layers: 2,
            channels: 128,
            ..Default::default()
        }
        .build()
        .unwrap();
        let mut oracle = Counting {
            inner,
            proxy: 0,
            heldout: 0,
        };
        let s = Sparsity::new(0.5).unwrap();
        let out = adaptive_prune(&mut oracle, s, &small_config(), Seed(3)).unwrap();
        let r = &out.report;
        assert_eq!(r.probe_evaluations, 3 * 18);
        assert_eq!(r.full_evaluations, 32);
        assert_eq!(oracle.proxy, r.probe_evaluations + r.full_evaluations);
        assert_eq!(oracle.heldout, 1);
        assert_eq!(r.total_evaluations, oracle.proxy + oracle.heldout);
        assert_eq!(out.selection.total_kept(), 128);
        assert_eq!(out.kappa_hat, r.branch);
        let again = adaptive_prune(&mut oracle, s, &small_config(), Seed(3)).unwrap();
        assert_eq!(again, out);
    }
}
