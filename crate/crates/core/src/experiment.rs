//! Grid runner: variants x sparsities x seeds against one oracle address,
//! appended to `results.jsonl`, plus the report step over that file.

use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adaptive::{adaptive_prune, AdaptiveConfig, ProbeReport};
use crate::analysis::{build_report, AnalysisReport, CellStats, ClassMap, SeedResult, Thresholds};
use crate::dbo::OptimizerConfig;
use crate::fusion::FusionWeights;
use crate::oracle::{
    EvalRequest, ExternalOracle, Oracle, OracleAddress, OracleError, SessionOptions, Split, SurrogateConfig,
    SurrogateModel,
};
use crate::profile::{ModelProfile, Seed, Sparsity};
use crate::search::{features_for, search_weights, PipelineError, Scorer};
use crate::variants::{class_map, nine_class_grid, preset, Variant};

pub const SCHEMA_VERSION: u32 = 1;
pub const RESULTS_FILE: &str = "results.jsonl";
/// Variant name used for adaptive-pruner cells.
pub const ADAPTIVE_VARIANT: &str = "Adaptive";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config: {0}")]
    Config(String),
    #[error("results file {path}: {reason}")]
    Results { path: PathBuf, reason: String },
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A battery name or an inline variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VariantRef {
    Preset(String),
    Inline(Variant),
}

impl VariantRef {
    pub fn resolve(&self) -> Result<Variant, ExperimentError> {
        match self {
            VariantRef::Preset(name) => {
                preset(name).ok_or_else(|| ExperimentError::Config(format!("unknown variant preset `{name}`")))
            }
            VariantRef::Inline(v) => Ok(v.clone()),
        }
    }
}

fn default_variants() -> Vec<VariantRef> {
    nine_class_grid()
        .into_iter()
        .map(|v| VariantRef::Preset(v.name))
        .collect()
}
fn default_sparsities() -> Vec<f64> {
    vec![0.5, 0.6, 0.7, 0.8]
}
fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2]
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}
fn default_jobs() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Profile JSON. With the surrogate oracle it replaces the synthetic
    /// profile; with an external oracle it must match what `describe` returns.
    #[serde(default)]
    pub profile: Option<PathBuf>,
    #[serde(default)]
    pub oracle: OracleAddress,
    #[serde(default)]
    pub surrogate: SurrogateConfig,
    #[serde(default = "default_variants")]
    pub variants: Vec<VariantRef>,
    #[serde(default = "default_sparsities")]
    pub sparsities: Vec<f64>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub dbo: OptimizerConfig,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    #[serde(default = "default_jobs")]
    pub jobs: usize,
    /// Per-request timeout for external oracles, in seconds.
    #[serde(default)]
    pub timeout_secs: Option<u64>,
    #[serde(default)]
    pub thresholds: Thresholds,
    /// Overrides the class map derived from the variant labels.
    #[serde(default)]
    pub class_map: Option<ClassMap>,
    /// Adds one adaptive-pruner cell per (sparsity, seed).
    #[serde(default)]
    pub adaptive: Option<AdaptiveConfig>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl ExperimentConfig {
    /// Reads a config; relative paths inside resolve against the file's directory.
    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = fs::read_to_string(path)
            .map_err(|e| ExperimentError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(p) = &config.profile {
            if p.is_relative() {
                config.profile = Some(base.join(p));
            }
        }
        if config.out_dir.is_relative() {
            config.out_dir = base.join(&config.out_dir);
        }
        Ok(config)
    }

    pub fn resolved_variants(&self) -> Result<Vec<Variant>, ExperimentError> {
        self.variants.iter().map(VariantRef::resolve).collect()
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Config(m));
        if self.variants.is_empty() && self.adaptive.is_none() {
            return bad("no variants".into());
        }
        if self.sparsities.is_empty() {
            return bad("no sparsities".into());
        }
        if self.seeds.is_empty() {
            return bad("no seeds".into());
        }
        if self.jobs == 0 {
            return bad("jobs must be >= 1".into());
        }
        for &s in &self.sparsities {
            Sparsity::new(s).map_err(|e| ExperimentError::Config(e.to_string()))?;
        }
        let variants = self.resolved_variants()?;
        let mut names = HashSet::new();
        for v in &variants {
            if v.name == ADAPTIVE_VARIANT {
                return bad(format!("variant name `{ADAPTIVE_VARIANT}` is reserved"));
            }
            if !names.insert(v.name.as_str()) {
                return bad(format!("duplicate variant `{}`", v.name));
            }
            for f in &v.features {
                f.validate()
                    .map_err(|e| ExperimentError::Config(format!("{}: {e}", v.name)))?;
            }
        }
        self.dbo.validate().map_err(ExperimentError::Config)?;
        self.thresholds
            .validate()
            .map_err(|e| ExperimentError::Config(e.to_string()))?;
        if let Some(a) = &self.adaptive {
            a.validate().map_err(|e| ExperimentError::Config(e.to_string()))?;
        }
        if let Some(p) = &self.profile {
            if !p.is_file() {
                return bad(format!("profile {} not found", p.display()));
            }
        }
        Ok(())
    }

    pub fn class_map(&self) -> Result<ClassMap, ExperimentError> {
        match &self.class_map {
            Some(m) => Ok(m.clone()),
            None => Ok(class_map(&self.resolved_variants()?, self.thresholds)),
        }
    }

    fn session_options(&self) -> SessionOptions {
        let mut options = SessionOptions::default();
        if let Some(t) = self.timeout_secs {
            options.timeout = std::time::Duration::from_secs(t);
        }
        options
    }
}

fn load_profile(path: &Path) -> Result<ModelProfile, ExperimentError> {
    let text = fs::read_to_string(path)
        .map_err(|e| ExperimentError::Config(format!("cannot read {}: {e}", path.display())))?;
    ModelProfile::from_json(&text).map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))
}

/// Opens oracle sessions for one address. Surrogates are built once and
/// cloned; external addresses get a fresh session per call.
#[derive(Debug, Clone)]
pub enum OracleFactory {
    Surrogate(SurrogateModel),
    External {
        address: OracleAddress,
        options: SessionOptions,
        expected: Option<ModelProfile>,
    },
}

impl OracleFactory {
    pub fn from_config(config: &ExperimentConfig) -> Result<Self, ExperimentError> {
        let profile = config.profile.as_deref().map(load_profile).transpose()?;
        match &config.oracle {
            OracleAddress::Surrogate => {
                let model = match profile {
                    Some(p) => config.surrogate.for_profile(p),
                    None => config.surrogate.build(),
                }
                .map_err(|e| ExperimentError::Config(e.to_string()))?;
                Ok(OracleFactory::Surrogate(model))
            }
            address => Ok(OracleFactory::External {
                address: address.clone(),
                options: config.session_options(),
                expected: profile,
            }),
        }
    }

    pub fn open(&self) -> Result<Box<dyn Oracle>, OracleError> {
        match self {
            OracleFactory::Surrogate(model) => Ok(Box::new(model.clone())),
            OracleFactory::External {
                address,
                options,
                expected,
            } => {
                let session = ExternalOracle::open(address, options)?;
                if let Some(expected) = expected {
                    if session.profile() != expected {
                        return Err(OracleError::Protocol {
                            line: String::new(),
                            reason: "remote profile differs from the configured profile file".into(),
                        });
                    }
                }
                Ok(Box::new(session))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    Ok,
    Error,
}

/// One results line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub variant: String,
    pub sparsity: f64,
    pub seed: Seed,
    pub heldout_acc: Option<f64>,
    pub proxy_acc: Option<f64>,
    pub weights: Option<FusionWeights>,
    pub timing_ms: u64,
    pub status: CellStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Oracle calls the cell made, including the held-out one.
    pub evaluations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_report: Option<ProbeReport>,
}

impl ExperimentRecord {
    fn key(&self) -> CellKey {
        CellKey::new(&self.variant, self.sparsity, self.seed)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct CellKey {
    variant: String,
    sparsity_bits: u64,
    seed: Seed,
}

impl CellKey {
    fn new(variant: &str, sparsity: f64, seed: Seed) -> Self {
        CellKey {
            variant: variant.to_string(),
            sparsity_bits: sparsity.to_bits(),
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    schema_version: u32,
}

/// Parsed `results.jsonl`: the header plus records in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultsFile {
    pub schema_version: u32,
    pub records: Vec<ExperimentRecord>,
}

impl ResultsFile {
    pub fn read(path: &Path) -> Result<Self, ExperimentError> {
        let err = |reason: String| ExperimentError::Results {
            path: path.to_path_buf(),
            reason,
        };
        let file = File::open(path).map_err(|e| err(e.to_string()))?;
        let mut lines = BufReader::new(file).lines().enumerate();
        let header: Header = match lines.next() {
            Some((_, line)) => serde_json::from_str(&line?).map_err(|e| err(format!("header: {e}")))?,
            None => return Err(err("empty file".into())),
        };
        if header.schema_version != SCHEMA_VERSION {
            return Err(err(format!("unsupported schema_version {}", header.schema_version)));
        }
        let mut records = Vec::new();
        for (i, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            records.push(serde_json::from_str(&line).map_err(|e| err(format!("line {}: {e}", i + 1)))?);
        }
        Ok(ResultsFile {
            schema_version: header.schema_version,
            records,
        })
    }

    /// The record in effect for each cell: the last one written.
    pub fn effective(&self) -> Vec<&ExperimentRecord> {
        let mut by_key: BTreeMap<CellKey, usize> = BTreeMap::new();
        for (i, r) in self.records.iter().enumerate() {
            by_key.insert(r.key(), i);
        }
        let mut idx: Vec<usize> = by_key.into_values().collect();
        idx.sort_unstable();
        idx.into_iter().map(|i| &self.records[i]).collect()
    }

    pub fn failures(&self) -> usize {
        self.effective()
            .iter()
            .filter(|r| r.status == CellStatus::Error)
            .count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Append to an existing results file, skipping completed cells.
    pub resume: bool,
    /// Overrides the config's `jobs`.
    pub jobs: Option<usize>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            resume: true,
            jobs: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct RunSummary {
    pub cells: usize,
    pub skipped: usize,
    pub completed: usize,
    pub failed: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone)]
enum CellJob {
    Variant(Variant),
    Adaptive(AdaptiveConfig),
}

impl CellJob {
    fn name(&self) -> &str {
        match self {
            CellJob::Variant(v) => &v.name,
            CellJob::Adaptive(_) => ADAPTIVE_VARIANT,
        }
    }
}

/// Stable 64-bit FNV-1a, used to give each cell its own optimizer stream.
fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

fn cell_seed(seed: Seed, variant: &str, sparsity: f64) -> Seed {
    let mut bytes = variant.as_bytes().to_vec();
    bytes.extend_from_slice(&sparsity.to_bits().to_le_bytes());
    seed.derive(fnv1a(&bytes))
}

struct CellOutput {
    heldout_acc: f64,
    proxy_acc: f64,
    weights: FusionWeights,
    evaluations: usize,
    probe_report: Option<ProbeReport>,
}

fn run_cell(
    oracle: &mut dyn Oracle,
    job: &CellJob,
    sparsity: Sparsity,
    seed: Seed,
    dbo: &OptimizerConfig,
    evaluations: &mut usize,
) -> Result<CellOutput, PipelineError> {
    let stream = cell_seed(seed, job.name(), sparsity.value());
    match job {
        CellJob::Variant(variant) => {
            let profile = oracle.profile().clone();
            let features = features_for(&profile, &variant.features, seed)?;
            let scorer = Scorer::new(&profile, &features, sparsity, dbo.bounds)?;
            let prefix = format!("{}/{}/{}/", variant.name, sparsity, seed);
            let out = search_weights(oracle, &scorer, &dbo.clone().with_seed(stream), &prefix)?;
            *evaluations = out.evaluations;
            let request = EvalRequest::new(out.selection, Split::Heldout, format!("{prefix}heldout"));
            let heldout = oracle.evaluate(&request)?;
            *evaluations += 1;
            Ok(CellOutput {
                heldout_acc: heldout.accuracy,
                proxy_acc: out.proxy_acc,
                weights: out.weights,
                evaluations: *evaluations,
                probe_report: None,
            })
        }
        CellJob::Adaptive(config) => {
            let mut config = config.clone();
            config.heldout_final = true;
            let out = adaptive_prune(oracle, sparsity, &config, stream)?;
            *evaluations = out.report.total_evaluations;
            Ok(CellOutput {
                heldout_acc: out.heldout_acc.expect("held-out evaluation requested"),
                proxy_acc: out.proxy_acc,
                weights: out.weights,
                evaluations: out.report.total_evaluations,
                probe_report: Some(out.report),
            })
        }
    }
}

fn execute(
    factory: &OracleFactory,
    job: &CellJob,
    sparsity: f64,
    seed: Seed,
    dbo: &OptimizerConfig,
) -> ExperimentRecord {
    let start = Instant::now();
    let mut evaluations = 0;
    let result = Sparsity::new(sparsity)
        .map_err(|e| PipelineError::Config(e.to_string()))
        .and_then(|s| {
            let mut oracle = factory.open()?;
            run_cell(oracle.as_mut(), job, s, seed, dbo, &mut evaluations)
        });
    let timing_ms = start.elapsed().as_millis() as u64;
    let mut record = ExperimentRecord {
        variant: job.name().to_string(),
        sparsity,
        seed,
        heldout_acc: None,
        proxy_acc: None,
        weights: None,
        timing_ms,
        status: CellStatus::Ok,
        error: None,
        evaluations,
        probe_report: None,
    };
    match result {
        Ok(out) => {
            record.heldout_acc = Some(out.heldout_acc);
            record.proxy_acc = Some(out.proxy_acc);
            record.weights = Some(out.weights);
            record.evaluations = out.evaluations;
            record.probe_report = out.probe_report;
        }
        Err(e) => {
            record.status = CellStatus::Error;
            record.error = Some(e.to_string());
        }
    }
    record
}

/// Runs every cell not already completed in `out_dir/results.jsonl`.
///
/// Completed cells are skipped; cells whose last record is an error are
/// retried and the new record appended. Cell failures are recorded, not
/// returned; only config and I/O problems abort the run.
pub fn run_experiment(config: &ExperimentConfig, options: RunOptions) -> Result<RunSummary, ExperimentError> {
    config.validate()?;
    let factory = OracleFactory::from_config(config)?;
    fs::create_dir_all(&config.out_dir)?;
    let path = config.out_dir.join(RESULTS_FILE);

    let mut done = HashSet::new();
    if path.exists() {
        if !options.resume {
            return Err(ExperimentError::Config(format!(
                "{} exists; resume or choose another output directory",
                path.display()
            )));
        }
        for r in ResultsFile::read(&path)?.effective() {
            if r.status == CellStatus::Ok {
                done.insert(r.key());
            }
        }
    } else {
        let mut f = File::create(&path)?;
        writeln!(
            f,
            "{}",
            serde_json::to_string(&Header {
                schema_version: SCHEMA_VERSION
            })
            .expect("header")
        )?;
    }

    let mut jobs: Vec<CellJob> = config.resolved_variants()?.into_iter().map(CellJob::Variant).collect();
    if let Some(a) = &config.adaptive {
        jobs.push(CellJob::Adaptive(a.clone()));
    }
    let mut cells = Vec::new();
    for job in &jobs {
        for &s in &config.sparsities {
            for &seed in &config.seeds {
                cells.push((job, s, Seed(seed)));
            }
        }
    }
    let total = cells.len();
    let pending: Vec<_> = cells
        .into_iter()
        .filter(|(job, s, seed)| !done.contains(&CellKey::new(job.name(), *s, *seed)))
        .collect();
    let mut summary = RunSummary {
        cells: total,
        skipped: total - pending.len(),
        ..RunSummary::default()
    };

    let mut file = OpenOptions::new().append(true).open(&path)?;
    let jobs_limit = options.jobs.unwrap_or(config.jobs).max(1);
    let (tx, rx) = mpsc::channel::<ExperimentRecord>();
    let write_result = std::thread::scope(|scope| -> Result<(), ExperimentError> {
        let factory = &factory;
        let dbo = &config.dbo;
        let pending = &pending;
        let worker = scope.spawn(move || {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs_limit)
                .build()
                .expect("thread pool");
            pool.install(|| {
                if jobs_limit == 1 {
                    for (job, s, seed) in pending {
                        let _ = tx.send(execute(factory, job, *s, *seed, dbo));
                    }
                } else {
                    pending.par_iter().for_each_with(tx, |tx, (job, s, seed)| {
                        let _ = tx.send(execute(factory, job, *s, *seed, dbo));
                    });
                }
            });
        });
        for record in rx {
            writeln!(file, "{}", serde_json::to_string(&record).expect("record serializes"))?;
            file.flush()?;
            summary.evaluations += record.evaluations;
            match record.status {
                CellStatus::Ok => summary.completed += 1,
                CellStatus::Error => summary.failed += 1,
            }
        }
        worker.join().expect("worker thread");
        Ok(())
    });
    write_result?;
    Ok(summary)
}

/// Per-(variant, sparsity) statistics over the successful records.
pub fn cell_stats(results: &ResultsFile) -> Vec<CellStats> {
    let mut groups: BTreeMap<(String, u64), Vec<SeedResult>> = BTreeMap::new();
    let mut order: Vec<(String, u64)> = Vec::new();
    for r in results.effective() {
        if r.status != CellStatus::Ok {
            continue;
        }
        let (Some(heldout_acc), Some(proxy_acc)) = (r.heldout_acc, r.proxy_acc) else {
            continue;
        };
        let key = (r.variant.clone(), r.sparsity.to_bits());
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(SeedResult {
            seed: r.seed,
            heldout_acc,
            proxy_acc,
        });
    }
    order
        .into_iter()
        .map(|key| {
            let mut per_seed = groups.remove(&key).expect("grouped");
            per_seed.sort_by_key(|s| s.seed);
            CellStats::from_seeds(key.0, f64::from_bits(key.1), per_seed).expect("nonempty group")
        })
        .collect()
}

/// Builds the analysis report of a results file.
pub fn analyze_results(results: &ResultsFile, class_map: &ClassMap) -> Result<AnalysisReport, ExperimentError> {
    if results.records.is_empty() {
        return Err(ExperimentError::Results {
            path: PathBuf::new(),
            reason: "no records".into(),
        });
    }
    Ok(build_report(cell_stats(results), class_map))
}

/// Reads `results.jsonl` from `dir`, writes the reports next to it and
/// returns the report with the written paths.
pub fn analyze_dir(dir: &Path, class_map: &ClassMap) -> Result<(AnalysisReport, Vec<PathBuf>), ExperimentError> {
    let results = ResultsFile::read(&dir.join(RESULTS_FILE))?;
    let report = analyze_results(&results, class_map)?;
    let written = report.write_to(dir)?;
    Ok((report, written))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(dir: &Path) -> ExperimentConfig {
        ExperimentConfig {
            surrogate: SurrogateConfig {
                layers: 2,
                channels: 128,
                ..SurrogateConfig::default()
            },
            variants: vec![VariantRef::Preset("V1a".into()), VariantRef::Preset("A5".into())],
            sparsities: vec![0.5, 0.7],
            seeds: vec![0, 1],
            dbo: OptimizerConfig {
                population: 6,
                iterations: 2,
                ..OptimizerConfig::default()
            },
            out_dir: dir.to_path_buf(),
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn grid_resume_and_analysis() {
        let dir = tempfile::tempdir().unwrap();
        let config = tiny(dir.path());
        let summary = run_experiment(&config, RunOptions::default()).unwrap();
        assert_eq!(summary.cells, 8);
        assert_eq!(summary.completed, 8);
        assert_eq!(summary.evaluations, 8 * 19);
        let results = ResultsFile::read(&dir.path().join(RESULTS_FILE)).unwrap();
        assert_eq!(results.records.len(), 8);
        for r in &results.records {
            assert_eq!(r.status, CellStatus::Ok);
            assert!(r.heldout_acc.is_some() && r.proxy_acc.is_some() && r.weights.is_some());
        }

        let again = run_experiment(&config, RunOptions::default()).unwrap();
        assert_eq!(again.skipped, 8);
        assert_eq!(again.evaluations, 0);
        assert_eq!(ResultsFile::read(&dir.path().join(RESULTS_FILE)).unwrap(), results);

        let err = run_experiment(
            &config,
            RunOptions {
                resume: false,
                jobs: None,
            },
        );
        assert!(matches!(err, Err(ExperimentError::Config(_))));

        let stats = cell_stats(&results);
        assert_eq!(stats.len(), 4);
        assert!(stats.iter().all(|c| c.per_seed.len() == 2));
        let (report, written) = analyze_dir(dir.path(), &config.class_map().unwrap()).unwrap();
        assert_eq!(written.len(), 3);
        let (again, _) = analyze_dir(dir.path(), &config.class_map().unwrap()).unwrap();
        assert_eq!(report.to_json(), again.to_json());
    }

    #[test]
    fn parallel_run_matches_serial() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        run_experiment(&tiny(a.path()), RunOptions::default()).unwrap();
        run_experiment(
            &tiny(b.path()),
            RunOptions {
                resume: true,
                jobs: Some(3),
            },
        )
        .unwrap();
        let strip = |dir: &Path| {
            let mut recs = ResultsFile::read(&dir.join(RESULTS_FILE)).unwrap().records;
            for r in &mut recs {
                r.timing_ms = 0;
            }
            recs.sort_by_key(|x| x.key());
            recs
        };
        assert_eq!(strip(a.path()), strip(b.path()));
    }

    #[test]
    fn failures_are_recorded_and_retried() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = tiny(dir.path());
        config.variants = vec![VariantRef::Preset("V1a".into())];
        config.sparsities = vec![0.5];
        config.seeds = vec![0];
        config.oracle = "cmd:/nonexistent/evaluator".parse().unwrap();
        let summary = run_experiment(&config, RunOptions::default()).unwrap();
        assert_eq!(summary.failed, 1);
        let results = ResultsFile::read(&dir.path().join(RESULTS_FILE)).unwrap();
        assert_eq!(results.failures(), 1);
        assert!(results.records[0].error.is_some());

        config.oracle = OracleAddress::Surrogate;
        let summary = run_experiment(&config, RunOptions::default()).unwrap();
        assert_eq!((summary.completed, summary.skipped), (1, 0));
        let results = ResultsFile::read(&dir.path().join(RESULTS_FILE)).unwrap();
        assert_eq!(results.records.len(), 2);
        assert_eq!(results.effective().len(), 1);
        assert_eq!(results.failures(), 0);
    }

    #[test]
    fn config_errors() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = tiny(dir.path());
        c.sparsities = vec![];
        assert!(c.validate().is_err());
        let mut c = tiny(dir.path());
        c.variants.push(VariantRef::Preset("nope".into()));
        assert!(c.validate().is_err());
        let mut c = tiny(dir.path());
        c.sparsities = vec![1.0];
        assert!(c.validate().is_err());
        let mut c = tiny(dir.path());
        c.profile = Some(dir.path().join("missing.json"));
        assert!(c.validate().is_err());
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"bogus": 1}"#).is_err());
        let parsed: ExperimentConfig = serde_json::from_str(
            r#"{"variants": ["V1a", {"name": "mine", "class": "kappa1",
                 "features": [{"kind": "sinusoid", "frequency": 3}]}]}"#,
        )
        .unwrap();
        let v = parsed.resolved_variants().unwrap();
        assert_eq!(v[1].name, "mine");
        assert_eq!(ExperimentConfig::default().resolved_variants().unwrap().len(), 9);
    }

    #[test]
    fn adaptive_cells_carry_probe_reports() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = tiny(dir.path());
        config.variants = vec![];
        config.sparsities = vec![0.5];
        config.seeds = vec![0];
        config.adaptive = Some(AdaptiveConfig {
            probe_budget: OptimizerConfig {
                population: 4,
                iterations: 1,
                ..OptimizerConfig::default()
            },
            full_budget: OptimizerConfig {
                population: 6,
                iterations: 2,
                ..OptimizerConfig::default()
            },
            ..AdaptiveConfig::default()
        });
        run_experiment(&config, RunOptions::default()).unwrap();
        let results = ResultsFile::read(&dir.path().join(RESULTS_FILE)).unwrap();
        let r = &results.records[0];
        assert_eq!(r.variant, ADAPTIVE_VARIANT);
        let report = r.probe_report.as_ref().unwrap();
        assert_eq!(report.total_evaluations, 3 * 8 + 18 + 1);
        assert_eq!(r.evaluations, report.total_evaluations);
    }
}
