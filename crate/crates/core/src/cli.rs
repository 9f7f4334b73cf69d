//! The `mdnc` command line: `train`, `evaluate`, `bundle` and `curves`.
//!
//! Every command resolves its settings (defaults, then an optional JSON config
//! or run manifest, then flags), writes its artifacts under `--out-dir` and
//! records a `manifest.json` with the resolved settings and sha256 checksums.
//! Passing that manifest back through `--config` repeats the run.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bundling::{
    run_bundle_experiment, write_curve_csv, BundleExperiment, BundleSummary, CurveSet, MdnP2bModel,
};
use crate::classifier::{evaluate, grid_search, AnyClassifier, Classifier, FittedFold, GridSpec, TrainConfig, Variant};
use crate::data::{compute_metrics, load_csv, load_mfeat, CsvSchema, Dataset, LabelColumn, MetricsSummary};
use crate::error::Error;
use crate::nn::{ModelDocument, MODEL_FORMAT_VERSION};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_DIVERGENCE: i32 = 2;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const LOG_ENV: &str = "MDNC_LOG";

#[derive(Debug, Parser)]
#[command(name = "mdnc", version, about = "Mixture-density-network classifiers and bundle pricing")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for folds, grid points and seeds.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
    /// JSON settings or a previous run's manifest; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fold-wise grid search of a classifier on a dataset.
    Train(TrainArgs),
    /// Scores the fold models of a train run on a dataset.
    Evaluate(EvaluateArgs),
    /// Simulates sales, fits both products per seed and prices the bundle.
    Bundle(BundleArgs),
    /// Exports purchase-probability and revenue curves from a bundle run.
    Curves(CurvesArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// CSV file, or a directory holding the mfeat-* files.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub layers: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub units: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub mixtures: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub sparsity: Option<Vec<f64>>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[command(flatten)]
    pub csv: CsvArgs,
}

#[derive(Debug, Args)]
pub struct CsvArgs {
    #[arg(long)]
    pub delimiter: Option<char>,
    #[arg(long)]
    pub no_header: bool,
    /// Zero-based label column; the last column by default.
    #[arg(long)]
    pub label_column: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Output directory of a `train` run.
    #[arg(long)]
    pub run_dir: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[command(flatten)]
    pub csv: CsvArgs,
}

#[derive(Debug, Args)]
pub struct BundleArgs {
    #[arg(long)]
    pub rate1: Option<f64>,
    #[arg(long)]
    pub rate2: Option<f64>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Simulated records per product.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub units: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CurvesArgs {
    /// Output directory of a `bundle` run.
    #[arg(long)]
    pub run_dir: Option<PathBuf>,
    /// Which seed's models to plot; the run's first seed by default.
    #[arg(long)]
    pub model_seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSettings {
    pub dataset: PathBuf,
    pub variant: Variant,
    pub folds: usize,
    pub seed: u64,
    pub grid: GridSpec,
    pub base: TrainConfig,
    pub csv: CsvSchema,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            dataset: PathBuf::new(),
            variant: Variant::C1,
            folds: 5,
            seed: 0,
            grid: GridSpec::default(),
            base: TrainConfig::default(),
            csv: CsvSchema::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct EvaluateSettings {
    pub run_dir: PathBuf,
    pub dataset: PathBuf,
    pub csv: CsvSchema,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct CurvesSettings {
    pub run_dir: PathBuf,
    pub model_seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: PathBuf,
    pub sha256: String,
}

/// Everything needed to repeat a run: the resolved settings, input checksums
/// and the checksums of what it wrote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub dataset_checksums: BTreeMap<String, String>,
    pub outputs: Vec<Artifact>,
    pub wall_clock_seconds: f64,
    pub format_versions: BTreeMap<String, u32>,
    pub tool_version: String,
}

impl RunManifest {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        read_json(path)
    }
}

pub fn sha256_file(path: &Path) -> anyhow::Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

/// Reads `--config`: either bare settings or a manifest whose `config` holds them.
fn load_settings<T: DeserializeOwned + Default>(config: Option<&Path>, command: &str) -> anyhow::Result<T> {
    let Some(path) = config else {
        return Ok(T::default());
    };
    let value: serde_json::Value = read_json(path)?;
    let settings = match value.get("command").and_then(|c| c.as_str()) {
        Some(c) if c != command => bail!("{} is a manifest for `{c}`, not `{command}`", path.display()),
        Some(_) => value.get("config").cloned().unwrap_or_default(),
        None => value,
    };
    serde_json::from_value(settings).with_context(|| format!("{}: settings do not match `{command}`", path.display()))
}

fn apply_csv_args(schema: &mut CsvSchema, args: &CsvArgs) -> anyhow::Result<()> {
    if let Some(d) = args.delimiter {
        if !d.is_ascii() {
            bail!("delimiter must be a single ASCII character");
        }
        schema.delimiter = d as u8;
    }
    if args.no_header {
        schema.has_header = false;
    }
    if let Some(i) = args.label_column {
        schema.label_column = LabelColumn::Index(i);
    }
    Ok(())
}

fn load_dataset(path: &Path, schema: &CsvSchema) -> anyhow::Result<Dataset> {
    if path.as_os_str().is_empty() {
        bail!("no dataset given (use --dataset)");
    }
    let data = if path.is_dir() {
        load_mfeat(path)?
    } else {
        load_csv(path, schema)?
    };
    Ok(data)
}

/// sha256 of a dataset file, or of each mfeat file in a directory.
fn dataset_checksums(path: &Path) -> anyhow::Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    if path.is_dir() {
        for (file, _) in crate::data::MFEAT_FILES {
            let p = path.join(file);
            out.insert(p.display().to_string(), sha256_file(&p)?);
        }
    } else {
        out.insert(path.display().to_string(), sha256_file(path)?);
    }
    Ok(out)
}

struct RunContext {
    out_dir: PathBuf,
    started: Instant,
    outputs: Vec<PathBuf>,
}

impl RunContext {
    fn new(out_dir: &Path) -> anyhow::Result<Self> {
        std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
        Ok(Self {
            out_dir: out_dir.to_path_buf(),
            started: Instant::now(),
            outputs: Vec::new(),
        })
    }

    fn path(&self, relative: &str) -> anyhow::Result<PathBuf> {
        let p = self.out_dir.join(relative);
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        Ok(p)
    }

    fn json<T: Serialize>(&mut self, relative: &str, value: &T) -> anyhow::Result<PathBuf> {
        let p = self.path(relative)?;
        write_json(&p, value)?;
        self.outputs.push(p.clone());
        Ok(p)
    }

    fn record(&mut self, path: PathBuf) {
        self.outputs.push(path);
    }

    fn finish<T: Serialize>(
        self,
        command: &str,
        config: &T,
        seeds: Vec<u64>,
        dataset_checksums: BTreeMap<String, String>,
    ) -> anyhow::Result<RunManifest> {
        let outputs = self
            .outputs
            .iter()
            .map(|p| {
                Ok(Artifact {
                    path: p.strip_prefix(&self.out_dir).unwrap_or(p).to_path_buf(),
                    sha256: sha256_file(p)?,
                })
            })
            .collect::<anyhow::Result<Vec<_>>>()?;
        let manifest = RunManifest {
            command: command.to_string(),
            config: serde_json::to_value(config)?,
            seeds,
            dataset_checksums,
            outputs,
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
            format_versions: BTreeMap::from([("model".to_string(), MODEL_FORMAT_VERSION)]),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        };
        write_json(&self.out_dir.join(MANIFEST_FILE), &manifest)?;
        Ok(manifest)
    }
}

fn cmd_train(common: &CommonArgs, args: &TrainArgs) -> anyhow::Result<RunManifest> {
    let mut s: TrainSettings = load_settings(common.config.as_deref(), "train")?;
    if let Some(d) = &args.dataset {
        s.dataset = d.clone();
    }
    if let Some(v) = &args.variant {
        s.variant = v.parse()?;
    }
    if s.variant == Variant::P2b {
        bail!(Error::validation("train supports the c1 and c2 variants"));
    }
    if let Some(seed) = common.seed {
        s.seed = seed;
    }
    if let Some(f) = args.folds {
        s.folds = f;
    }
    if let Some(v) = &args.layers {
        s.grid.layers = v.clone();
    }
    if let Some(v) = &args.units {
        s.grid.units = v.clone();
    }
    if let Some(v) = &args.mixtures {
        s.grid.mixtures = v.clone();
    }
    if let Some(v) = &args.sparsity {
        s.grid.sparsity = v.clone();
    }
    if let Some(v) = args.epochs {
        s.base.epochs = v;
    }
    if let Some(v) = args.patience {
        s.base.patience = v;
    }
    if let Some(v) = args.batch_size {
        s.base.batch_size = v;
    }
    if let Some(v) = args.learning_rate {
        s.base.learning_rate = v;
    }
    apply_csv_args(&mut s.csv, &args.csv)?;

    let data = load_dataset(&s.dataset, &s.csv)?;
    let checksums = dataset_checksums(&s.dataset)?;
    let mut ctx = RunContext::new(&common.out_dir)?;
    let (report, fitted) = grid_search(&data, s.variant, &s.grid, &s.base, s.folds, s.seed)?;
    for (i, fold) in fitted.iter().enumerate() {
        ctx.json(&format!("models/fold{i}.json"), fold)?;
    }
    ctx.json("metrics.json", &report)?;
    println!(
        "{} on {} ({} folds): accuracy {}  precision {}  recall {}  f1 {}",
        s.variant,
        s.dataset.display(),
        s.folds,
        report.summary.accuracy,
        report.summary.precision,
        report.summary.recall,
        report.summary.f1
    );
    ctx.finish("train", &s, vec![s.seed], checksums)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub dataset: PathBuf,
    pub folds: Vec<crate::data::Metrics>,
    pub summary: MetricsSummary,
}

fn cmd_evaluate(common: &CommonArgs, args: &EvaluateArgs) -> anyhow::Result<RunManifest> {
    let mut s: EvaluateSettings = load_settings(common.config.as_deref(), "evaluate")?;
    if let Some(d) = &args.run_dir {
        s.run_dir = d.clone();
    }
    if let Some(d) = &args.dataset {
        s.dataset = d.clone();
    }
    apply_csv_args(&mut s.csv, &args.csv)?;
    let models_dir = s.run_dir.join("models");
    let mut fold_files: Vec<PathBuf> = std::fs::read_dir(&models_dir)
        .with_context(|| format!("no fold models under {}", models_dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    fold_files.sort();
    if fold_files.is_empty() {
        bail!(Error::validation(format!("{} holds no fold models", models_dir.display())));
    }
    let data = load_dataset(&s.dataset, &s.csv)?;
    let mut checksums = dataset_checksums(&s.dataset)?;
    let mut folds = Vec::new();
    for file in &fold_files {
        checksums.insert(file.display().to_string(), sha256_file(file)?);
        let fitted: FittedFold = read_json(file)?;
        let model = AnyClassifier::from_document(&fitted.document)?;
        let scaled = fitted.normalization.apply(&data)?;
        let predicted = match &model {
            AnyClassifier::C1(m) => evaluate(m, &scaled)?.predicted,
            AnyClassifier::C2(m) => evaluate(m, &scaled)?.predicted,
        };
        folds.push(compute_metrics(&predicted, data.labels(), data.class_count())?);
    }
    let report = EvaluationReport {
        dataset: s.dataset.clone(),
        summary: MetricsSummary::of(&folds),
        folds,
    };
    let mut ctx = RunContext::new(&common.out_dir)?;
    ctx.json("evaluation.json", &report)?;
    println!(
        "{} fold models on {}: accuracy {}",
        fold_files.len(),
        s.dataset.display(),
        report.summary.accuracy
    );
    ctx.finish("evaluate", &s, Vec::new(), checksums)
}

fn print_bundle_table(summary: &BundleSummary) {
    println!("{:<10} {:>10} {:>16} {:>10}", "", "true mean", "estimated", "accuracy");
    for row in &summary.rows {
        let acc = row
            .test_accuracy
            .map(|a| a.to_string())
            .unwrap_or_else(|| "-".to_string());
        println!(
            "{:<10} {:>10.2} {:>16} {:>10}",
            row.name,
            row.true_mean,
            format!("{:.2}({:.2})", row.estimated_mean.mean, row.estimated_mean.std),
            acc
        );
    }
    println!(
        "optimal bundle price {:.2}({:.2}), ground truth {:.1}",
        summary.optimal_price.mean, summary.optimal_price.std, summary.true_optimal_price
    );
}

fn write_curves(ctx: &mut RunContext, dir: &str, curves: &[CurveSet]) -> anyhow::Result<()> {
    for curve in curves {
        let file = format!("{}.csv", curve.name);
        let path = ctx.path(&if dir.is_empty() { file } else { format!("{dir}/{file}") })?;
        write_curve_csv(&path, curve)?;
        ctx.record(path);
    }
    Ok(())
}

fn cmd_bundle(common: &CommonArgs, args: &BundleArgs) -> anyhow::Result<RunManifest> {
    let mut exp: BundleExperiment = load_settings(common.config.as_deref(), "bundle")?;
    if let Some(r) = args.rate1 {
        exp.rate1 = r;
    }
    if let Some(r) = args.rate2 {
        exp.rate2 = r;
    }
    if let Some(k) = args.k {
        exp.model.mixtures = k;
    }
    if let Some(n) = args.n {
        exp.records = n;
    }
    if let Some(seeds) = &args.seeds {
        exp.seeds = seeds.clone();
    } else if let Some(seed) = common.seed {
        exp.seeds = vec![seed];
    }
    if let Some(e) = args.epochs {
        exp.model.epochs = e;
    }
    if let Some(u) = args.units {
        exp.model.units = u;
    }
    exp.validate()?;
    let mut ctx = RunContext::new(&common.out_dir)?;
    let (summary, models) = run_bundle_experiment(&exp)?;
    for (s, [m1, m2]) in exp.seeds.iter().zip(&models) {
        ctx.json(&format!("models/seed{s}_product1.json"), &m1.to_document())?;
        ctx.json(&format!("models/seed{s}_product2.json"), &m2.to_document())?;
    }
    let [m1, m2] = &models[0];
    write_curves(&mut ctx, "curves", &CurveSet::for_models(&exp, m1, m2)?)?;
    ctx.json("summary.json", &summary)?;
    print_bundle_table(&summary);
    let seeds = exp.seeds.clone();
    ctx.finish("bundle", &exp, seeds, BTreeMap::new())
}

fn cmd_curves(common: &CommonArgs, args: &CurvesArgs) -> anyhow::Result<RunManifest> {
    let mut s: CurvesSettings = load_settings(common.config.as_deref(), "curves")?;
    if let Some(d) = &args.run_dir {
        s.run_dir = d.clone();
    }
    if args.model_seed.is_some() {
        s.model_seed = args.model_seed;
    }
    let summary_path = s.run_dir.join("summary.json");
    let summary: BundleSummary = read_json(&summary_path).context("curves needs the output directory of a bundle run")?;
    let exp = &summary.experiment;
    let seed = s.model_seed.unwrap_or(exp.seeds[0]);
    let mut checksums = BTreeMap::from([(summary_path.display().to_string(), sha256_file(&summary_path)?)]);
    let mut load = |i: usize| -> anyhow::Result<MdnP2bModel> {
        let path = s.run_dir.join(format!("models/seed{seed}_product{i}.json"));
        checksums.insert(path.display().to_string(), sha256_file(&path)?);
        Ok(MdnP2bModel::from_document(&ModelDocument::load(&path)?)?)
    };
    let (m1, m2) = (load(1)?, load(2)?);
    let mut ctx = RunContext::new(&common.out_dir)?;
    let curves = CurveSet::for_models(exp, &m1, &m2)?;
    write_curves(&mut ctx, "", &curves)?;
    println!("wrote {} curves of {} points to {}", curves.len(), curves[0].prices.len(), common.out_dir.display());
    ctx.finish("curves", &s, vec![seed], checksums)
}

pub fn run(cli: &Cli) -> anyhow::Result<RunManifest> {
    if let Some(jobs) = cli.common.jobs {
        if jobs == 0 {
            bail!(Error::validation("--jobs must be at least 1"));
        }
        // a second call in the same process keeps the existing pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    match &cli.command {
        Command::Train(a) => cmd_train(&cli.common, a),
        Command::Evaluate(a) => cmd_evaluate(&cli.common, a),
        Command::Bundle(a) => cmd_bundle(&cli.common, a),
        Command::Curves(a) => cmd_curves(&cli.common, a),
    }
}

/// Exit code for a failed run: 2 for numeric divergence, 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_divergence() => EXIT_DIVERGENCE,
        _ => EXIT_FAILURE,
    }
}

/// Parses `args` (program name first) and runs the command, returning the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_FAILURE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(_) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}

pub fn init_logging() {
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn")).try_init();
}
