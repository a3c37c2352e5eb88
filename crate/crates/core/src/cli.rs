//! The `rankprune` command line. Every command reads the same JSON config
//! as `experiment run`; flags override its fields.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::adaptive::adaptive_prune;
use crate::analysis::{chebyshev_sweep, kappa_from_sweep, DEFAULT_D_MAX, DEFAULT_EPSILON, DEFAULT_GRID};
use crate::experiment::{
    analyze_dir, run_experiment, ExperimentConfig, OracleFactory, ResultsFile, RunOptions, RESULTS_FILE,
};
use crate::features::{build_raw_feature, FeatureSpec};
use crate::fusion::FusionWeights;
use crate::oracle::{serve, Oracle, OracleAddress};
use crate::profile::{ModelProfile, Seed, Sparsity};
use crate::ranknorm::RankMap;
use crate::search::{features_for, search_weights, Scorer};
use crate::variants::preset;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_FAILURES: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "rankprune", version, about = "Rank-space channel-pruning scorers")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Profile files.
    #[command(subcommand)]
    Profile(ProfileCommand),
    /// Feature columns.
    #[command(subcommand)]
    Features(FeaturesCommand),
    /// Search fusion exponents for one variant on the proxy split.
    Search(SearchArgs),
    /// Top-K selection for fixed exponents; no oracle calls.
    Prune(PruneArgs),
    /// Variant x sparsity x seed grids.
    #[command(subcommand)]
    Experiment(ExperimentCommand),
    /// Probe three classes, pick the regime and prune.
    Adaptive(AdaptiveArgs),
    /// Rank-Chebyshev complexity of a variant's features.
    Kappa(KappaArgs),
    /// Serve the surrogate oracle over stdin/stdout.
    Serve(ServeArgs),
}

#[derive(Debug, Subcommand)]
enum ProfileCommand {
    Validate { path: PathBuf },
}

#[derive(Debug, Subcommand)]
enum FeaturesCommand {
    /// Write the rank-normalized feature matrix as JSON (or CSV for `.csv`).
    Emit(EmitArgs),
}

#[derive(Debug, Subcommand)]
enum ExperimentCommand {
    Run(RunArgs),
    /// Write report.json, report.txt and plot.csv next to results.jsonl.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// Experiment config JSON.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `surrogate`, `cmd:<program args>` or `tcp:<host:port>`.
    #[arg(long)]
    oracle: Option<OracleAddress>,
    /// Profile JSON file.
    #[arg(long)]
    profile: Option<PathBuf>,
    /// Record the oracle transcript to this `.jsonl` file.
    #[arg(long)]
    record: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VariantArg {
    /// Preset variant name.
    #[arg(long, conflicts_with = "spec")]
    variant: Option<String>,
    /// JSON file holding a list of feature specs.
    #[arg(long)]
    spec: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EmitArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    variant: VariantArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SearchArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    variant: VariantArg,
    #[arg(long)]
    sparsity: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PruneArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    variant: VariantArg,
    #[arg(long)]
    sparsity: f64,
    /// Comma-separated exponents `w_t,w_1,...,w_D`; all ones by default.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    weights: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also emit 0/1 masks per layer.
    #[arg(long)]
    masks: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Continue an existing results file.
    #[arg(long)]
    resume: bool,
    #[arg(long)]
    jobs: Option<usize>,
    /// Run this single seed instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory holding results.jsonl; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AdaptiveArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    sparsity: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct KappaArgs {
    #[command(flatten)]
    variant: VariantArg,
    /// Tolerances; the default is 0.05.
    #[arg(long, value_delimiter = ',')]
    epsilon: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_D_MAX)]
    d_max: usize,
    #[arg(long, default_value_t = DEFAULT_GRID)]
    grid: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    profile: Option<PathBuf>,
    /// Boundary-interaction strength; overrides the config.
    #[arg(long)]
    lambda: Option<f64>,
}

/// A failure with the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError {
        code: EXIT_CONFIG,
        message: e.to_string(),
    }
}

fn run_err(e: impl std::fmt::Display) -> CliError {
    CliError {
        code: EXIT_FAILURES,
        message: e.to_string(),
    }
}

type CliResult = Result<i32, CliError>;

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig, CliError> {
    match path {
        Some(p) => ExperimentConfig::load(p).map_err(config_err),
        None => Ok(ExperimentConfig::default()),
    }
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig, CliError> {
        let mut config = load_config(self.config.as_deref())?;
        if let Some(o) = &self.oracle {
            config.oracle = o.clone();
        }
        if let Some(p) = &self.profile {
            config.profile = Some(p.clone());
        }
        Ok(config)
    }

    fn open(&self, config: &ExperimentConfig) -> Result<Box<dyn Oracle>, CliError> {
        let mut factory = OracleFactory::from_config(config).map_err(config_err)?;
        if let OracleFactory::External { options, .. } = &mut factory {
            options.record = self.record.clone();
        }
        factory.open().map_err(run_err)
    }

    /// The profile without opening an oracle when a file is given.
    fn profile(&self, config: &ExperimentConfig) -> Result<ModelProfile, CliError> {
        match &config.profile {
            Some(p) => read_profile(p),
            None => Ok(self.open(config)?.profile().clone()),
        }
    }
}

impl VariantArg {
    fn specs(&self) -> Result<Vec<FeatureSpec>, CliError> {
        match (&self.variant, &self.spec) {
            (Some(name), _) => preset(name)
                .map(|v| v.features)
                .ok_or_else(|| config_err(format!("unknown variant preset `{name}`"))),
            (None, Some(path)) => {
                let text = fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
                let values: Vec<serde_json::Value> =
                    serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
                values
                    .iter()
                    .map(|v| FeatureSpec::from_value(v).map_err(config_err))
                    .collect()
            }
            (None, None) => Err(config_err("one of --variant or --spec is required")),
        }
    }
}

fn read_profile(path: &Path) -> Result<ModelProfile, CliError> {
    let text = fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    ModelProfile::from_json(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))
}

fn sparsity(s: f64) -> Result<Sparsity, CliError> {
    Sparsity::new(s).map_err(config_err)
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(run_err)?;
            }
            fs::write(p, format!("{text}\n")).map_err(run_err)
        }
        None => writeln!(io::stdout(), "{text}").map_err(run_err),
    }
}

fn emit_json<T: Serialize>(out: Option<&Path>, value: &T) -> Result<(), CliError> {
    emit(out, &serde_json::to_string_pretty(value).expect("output serializes"))
}

fn profile_validate(path: &Path) -> CliResult {
    let profile = read_profile(path)?;
    println!(
        "ok: {} layers, {} channels",
        profile.layers().len(),
        profile.total_channels()
    );
    for l in profile.layers() {
        println!("  {}: {}", l.layer_id(), l.channels());
    }
    Ok(EXIT_OK)
}

fn features_emit(args: &EmitArgs) -> CliResult {
    let config = args.common.config()?;
    let profile = args.common.profile(&config)?;
    let specs = args.variant.specs()?;
    let matrix = features_for(&profile, &specs, Seed(args.seed)).map_err(config_err)?;
    let csv = args
        .out
        .as_deref()
        .is_some_and(|p| p.extension().is_some_and(|e| e == "csv"));
    let text = if csv { matrix.to_csv() } else { matrix.to_json() };
    emit(args.out.as_deref(), text.trim_end())?;
    Ok(EXIT_OK)
}

fn search(args: &SearchArgs) -> CliResult {
    let config = args.common.config()?;
    let specs = args.variant.specs()?;
    let s = sparsity(args.sparsity)?;
    let mut oracle = args.common.open(&config)?;
    let profile = oracle.profile().clone();
    let features = features_for(&profile, &specs, Seed(args.seed)).map_err(config_err)?;
    let scorer = Scorer::new(&profile, &features, s, config.dbo.bounds).map_err(config_err)?;
    let dbo = config.dbo.clone().with_seed(Seed(args.seed));
    let out = search_weights(oracle.as_mut(), &scorer, &dbo, "search-").map_err(run_err)?;
    emit_json(args.out.as_deref(), &out)?;
    Ok(EXIT_OK)
}

fn prune(args: &PruneArgs) -> CliResult {
    let config = args.common.config()?;
    let profile = args.common.profile(&config)?;
    let specs = args.variant.specs()?;
    let s = sparsity(args.sparsity)?;
    let features = features_for(&profile, &specs, Seed(args.seed)).map_err(config_err)?;
    let scorer = Scorer::new(&profile, &features, s, config.dbo.bounds).map_err(config_err)?;
    let weights = match &args.weights {
        Some(point) => scorer.weights(point).map_err(config_err)?,
        None => FusionWeights::ones(features.dim()),
    };
    let selection = scorer.select(&weights).map_err(config_err)?;
    let mut value = serde_json::to_value(&selection).expect("selection serializes");
    if args.masks {
        value["mask"] = serde_json::to_value(selection.masks(&profile)).expect("masks serialize");
    }
    emit_json(args.out.as_deref(), &value)?;
    Ok(EXIT_OK)
}

fn experiment_run(args: &RunArgs) -> CliResult {
    let mut config = args.common.config()?;
    if let Some(out) = &args.out {
        config.out_dir = out.clone();
    }
    if let Some(seed) = args.seed {
        config.seeds = vec![seed];
    }
    if args.common.record.is_some() {
        return Err(config_err(
            "--record applies to single-session commands, not experiment run",
        ));
    }
    let summary = run_experiment(
        &config,
        RunOptions {
            resume: args.resume,
            jobs: args.jobs,
        },
    )
    .map_err(|e| match e {
        crate::experiment::ExperimentError::Config(_) => config_err(e),
        other => run_err(other),
    })?;
    eprintln!(
        "{} cells: {} completed, {} failed, {} skipped, {} evaluations",
        summary.cells, summary.completed, summary.failed, summary.skipped, summary.evaluations
    );
    let results = ResultsFile::read(&config.out_dir.join(RESULTS_FILE)).map_err(run_err)?;
    Ok(if results.failures() > 0 { EXIT_FAILURES } else { EXIT_OK })
}

fn experiment_analyze(args: &AnalyzeArgs) -> CliResult {
    let mut config = load_config(args.config.as_deref())?;
    if let Some(out) = &args.out {
        config.out_dir = out.clone();
    }
    let class_map = config.class_map().map_err(config_err)?;
    let (report, written) = analyze_dir(&config.out_dir, &class_map).map_err(config_err)?;
    print!("{}", report.text_tables());
    for p in written {
        eprintln!("wrote {}", p.display());
    }
    let results = ResultsFile::read(&config.out_dir.join(RESULTS_FILE)).map_err(run_err)?;
    Ok(if results.failures() > 0 { EXIT_FAILURES } else { EXIT_OK })
}

fn adaptive(args: &AdaptiveArgs) -> CliResult {
    let config = args.common.config()?;
    let s = sparsity(args.sparsity)?;
    let adaptive = config.adaptive.clone().unwrap_or_default();
    adaptive.validate().map_err(config_err)?;
    let mut oracle = args.common.open(&config)?;
    let out = adaptive_prune(oracle.as_mut(), s, &adaptive, Seed(args.seed)).map_err(run_err)?;
    eprintln!(
        "kappa_hat = {} (delta_env {:+.4}, delta_raw {:+.4})",
        out.kappa_hat, out.report.delta_env, out.report.delta_raw
    );
    emit_json(args.out.as_deref(), &out)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct KappaRow {
    feature: String,
    epsilon: f64,
    kappa: Option<f64>,
    d: Option<usize>,
}

fn kappa(args: &KappaArgs) -> CliResult {
    let specs = args.variant.specs()?;
    let epsilons = if args.epsilon.is_empty() {
        vec![DEFAULT_EPSILON]
    } else {
        args.epsilon.clone()
    };
    if let Some(e) = epsilons.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        return Err(config_err(format!("epsilon {e} must be > 0")));
    }
    let grid = RankMap::uniform(args.grid);
    let mut rows = Vec::new();
    for spec in &specs {
        let phi = build_raw_feature(&grid, spec, Seed(args.seed)).map_err(config_err)?;
        let sweep = chebyshev_sweep(&phi, args.d_max).map_err(config_err)?;
        for &eps in &epsilons {
            let k = kappa_from_sweep(&sweep, eps);
            rows.push(KappaRow {
                feature: spec.name(),
                epsilon: eps,
                kappa: k.d.map(|_| k.kappa),
                d: k.d,
            });
        }
    }
    emit_json(args.out.as_deref(), &rows)?;
    Ok(EXIT_OK)
}

fn serve_cmd(args: &ServeArgs) -> CliResult {
    let mut config = load_config(args.config.as_deref())?;
    if let Some(p) = &args.profile {
        config.profile = Some(p.clone());
    }
    if let Some(l) = args.lambda {
        config.surrogate.lambda = l;
    }
    config.oracle = OracleAddress::Surrogate;
    let OracleFactory::Surrogate(mut model) = OracleFactory::from_config(&config).map_err(config_err)? else {
        unreachable!("surrogate address")
    };
    let stdin = io::stdin();
    serve(&mut model, stdin.lock(), io::stdout().lock()).map_err(run_err)?;
    Ok(EXIT_OK)
}

impl Cli {
    pub fn execute(&self) -> CliResult {
        match &self.command {
            Command::Profile(ProfileCommand::Validate { path }) => profile_validate(path),
            Command::Features(FeaturesCommand::Emit(a)) => features_emit(a),
            Command::Search(a) => search(a),
            Command::Prune(a) => prune(a),
            Command::Experiment(ExperimentCommand::Run(a)) => experiment_run(a),
            Command::Experiment(ExperimentCommand::Analyze(a)) => experiment_analyze(a),
            Command::Adaptive(a) => adaptive(a),
            Command::Kappa(a) => kappa(a),
            Command::Serve(a) => serve_cmd(a),
        }
    }
}

/// Parses `args` and runs the command; returns the process exit code.
/// Usage errors exit with the config-error code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match cli.execute() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}
